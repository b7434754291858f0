// Acceptance suite: one PASS/FAIL line per criterion with its runtime.
//
//   acceptance [--only N] [--known-unattainable N[,M...]]
//
// Exit status is 0 when the set of failing criteria equals the declared unattainable set.

#include <Eigen/Dense>

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dfmix/dfmix.hpp"

using namespace dfmix;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double time_limit;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...)
{
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

constexpr std::uint64_t seed = 20261018;

// Stationary solutions gathered for the mass-balance check.
std::vector<std::pair<MixedSystem, MixedState>> solved;

void keep(const MixedSystem& sys, const MixedState& st) { solved.emplace_back(sys, st); }

MixedSystem make_system(const MeshPtr& mesh, CoefficientField c, ScalarField f, BoundaryData b)
{
    MixedSystem sys;
    sys.mesh = mesh;
    sys.coeffs = std::move(c);
    sys.source = std::move(f);
    sys.boundary = std::move(b);
    return sys;
}

double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// ---------------------------------------------------------------------------

Outcome inequality_suite()
{
    const auto r = inequality_sweep(seed, 100000, 0);
    const double worst = std::min({r.continuity, r.monotonicity, r.holder, r.sqrt_mono});
    return {worst >= -1e-12 && r.witness_monotonicity <= 1e-12 && r.witness_holder <= 1e-12,
            fmt("worst slack %.3e (cont %.2e, mono %.2e, hoelder %.2e, sqrt %.2e); witnesses %.1e/%.1e",
                worst, r.continuity, r.monotonicity, r.holder, r.sqrt_mono, r.witness_monotonicity,
                r.witness_holder)};
}

Outcome closure_round_trip()
{
    const double err = closure_roundtrip_sweep(seed, 10000);
    return {err <= 1e-10, fmt("max |G(F(g)) - g| / (1 + |g|) = %.3e", err)};
}

Outcome discrete_monotonicity()
{
    std::mt19937_64 rng(seed);
    const double slack = operator_monotonicity_sweep(rng, 1000, 4);
    return {slack >= -1e-10, fmt("1000 pairs on 4x4, worst relative slack %.3e", slack)};
}

// Affine residual for beta = 0, eps = 0: K x - r with columns probed from the residual.
Vector linear_saddle_solve(const MixedSystem& sys)
{
    const auto n = static_cast<Eigen::Index>(sys.size());
    const Vector r0 = residual(sys, Vector::Zero(n));
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Vector e = Vector::Zero(n);
        e[j] = 1.0;
        K.col(j) = residual(sys, e) - r0;
    }
    return K.partialPivLu().solve(-r0);
}

Outcome linear_limit()
{
    double worst = 0.0;
    for (int n : {2, 4, 8, 16}) {
        auto mesh = build_structured_mesh(n, n);
        const auto alpha = sample_centroids(mesh, [](const Vec2& x) { return 1.0 + 0.5 * std::sin(3 * x[0] + x[1]); });
        const auto c = CoefficientField::from_fields(alpha, ScalarField::zeros(mesh),
                                                     ScalarField::constant(mesh, 1.0),
                                                     ScalarField::constant(mesh, 1.0));
        auto sys = make_system(mesh, c, sample_centroids(mesh, [](const Vec2& x) { return 1.0 + x[0]; }),
                               sample_boundary(mesh, [](const Vec2& x) { return 1.0 + x[0] * x[1]; }));
        const auto st = solve_stationary(sys, {}, 1e-13).first;
        keep(sys, st);
        const Vector ref = linear_saddle_solve(sys);
        worst = std::max(worst, max_abs(pack_state(st.first, st.second) - ref));
    }
    return {worst <= 1e-10, fmt("max deviation from direct linear solve over 2x2..16x16: %.3e", worst)};
}

Outcome continuation_stability()
{
    auto mesh = build_structured_mesh(16, 16);
    const auto sys = sine_case(1.0, 1.0).system(mesh);
    const auto [st, rep] = solve_stationary(sys, {}, 1e-10);
    keep(sys, st);
    std::vector<StageRecord> stages;
    for (const auto& s : rep.stages)
        if (s.eps > 0.0)
            stages.push_back(s);
    if (stages.size() < 5)
        return {false, fmt("only %zu continuation stages", stages.size())};
    const auto last = std::vector<StageRecord>(stages.end() - 4, stages.end());
    double mlo = 1e300, mhi = 0, slo = 1e300, shi = 0, worst_ratio = 0;
    for (std::size_t i = 0; i < last.size(); ++i) {
        mlo = std::min(mlo, last[i].m_norm);
        mhi = std::max(mhi, last[i].m_norm);
        slo = std::min(slo, last[i].S_norm);
        shi = std::max(shi, last[i].S_norm);
        const auto k = stages.size() - 4 + i;
        worst_ratio = std::max(worst_ratio, stages[k].distance / stages[k - 1].distance);
    }
    const bool ok = mhi < 2 * mlo && shi < 2 * slo && worst_ratio <= 0.5;
    return {ok, fmt("%zu stages; last 4: |m| spread %.4f, |S| spread %.4f, max Cauchy ratio %.3f",
                    stages.size(), mhi / mlo, shi / slo, worst_ratio)};
}

MixedState random_state(const MeshPtr& mesh, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> m(mesh->num_edges()), s(mesh->num_cells());
    for (double& v : m)
        v = u(rng);
    for (double& v : s)
        v = u(rng);
    return {FluxField(mesh, m), ScalarField(mesh, s)};
}

Outcome uniqueness()
{
    std::mt19937_64 rng(seed);
    const double tol = 1e-11;
    std::vector<MixedSystem> cases;
    {
        auto mesh = build_structured_mesh(6, 6);
        cases.push_back(sine_case(1.0, 1.0).system(mesh));
    }
    {
        auto mesh = build_structured_mesh(5, 5);
        cases.push_back(make_system(mesh, CoefficientField::constant(mesh, 2.0, 0.5),
                                    sample_centroids(mesh, [](const Vec2& x) { return x[0] - x[1] * x[1]; }),
                                    sample_boundary(mesh, [](const Vec2& x) { return 1.0 + x[0]; })));
    }
    {
        auto mesh = build_structured_mesh(7, 7);
        std::uniform_real_distribution<double> ua(0.5, 2.0), ub(0.5, 3.0);
        std::vector<double> a(mesh->num_cells()), b(mesh->num_cells());
        for (std::size_t c = 0; c < a.size(); ++c) {
            a[c] = ua(rng);
            b[c] = ub(rng);
        }
        const auto coeffs = CoefficientField::from_fields({mesh, a}, {mesh, b}, ScalarField::constant(mesh, 1.0),
                                                          ScalarField::constant(mesh, 1.0));
        cases.push_back(make_system(mesh, coeffs, ScalarField::constant(mesh, 1.0),
                                    sample_boundary(mesh, [](const Vec2& x) { return 2.0 - x[1]; })));
    }
    double worst = 0.0;
    for (const auto& sys : cases) {
        const MixedState zero{FluxField::zeros(sys.mesh), ScalarField::zeros(sys.mesh)};
        const auto a = solve_stationary(sys, {}, tol, zero).first;
        const auto b = solve_stationary(sys, {}, tol, random_state(sys.mesh, rng)).first;
        keep(sys, a);
        keep(sys, b);
        worst = std::max(worst, state_distance(a, b));
    }
    return {worst <= 10 * tol, fmt("3 instances, max zero/random-start distance %.3e (limit %.1e)", worst, 10 * tol)};
}

TransientProblem draining_problem(int n, double horizon, int steps)
{
    auto mesh = build_structured_mesh(n, n);
    TransientProblem p;
    p.mesh = mesh;
    p.time = {horizon, steps};
    p.coeffs = {CoefficientField::constant(mesh, 1.0, 1.0, 1.0, 1.0)};
    p.sources = {ScalarField::zeros(mesh)};
    p.initial = cell_averages(mesh, [](const Vec2& x) { return 4.0 * std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); });
    return p;
}

Outcome mass_balance()
{
    double worst = 0.0;
    for (const auto& [sys, st] : solved) {
        const auto div = divergence(st.first);
        for (std::size_t c = 0; c < div.size(); ++c)
            worst = std::max(worst, std::abs(div[c] - sys.source[c]));
    }
    const auto res = run(draining_problem(8, 0.5, 100), 1e-12);
    const double drift = std::abs(res.monitor.cumulative_mass_defect());
    return {!solved.empty() && worst <= 1e-12 && drift < 1e-10,
            fmt("%zu stationary solutions, max |div m - f| %.3e; transient K=100 mass drift %.3e",
                solved.size(), worst, drift)};
}

Outcome recursion()
{
    const int K = 100;
    auto mesh = build_structured_mesh(8, 8);
    TransientProblem p;
    p.mesh = mesh;
    p.time = {1.0, K};
    for (int k = 0; k <= K; ++k) {
        const double g = 1.0 + 0.5 * std::sin(2 * M_PI * p.time.time(k));
        p.coeffs.push_back(CoefficientField::constant(mesh, 1.0, 1.0, g, 1.0));
    }
    p.lipschitz.gamma = M_PI * (1 + 1e-9);
    p.sources = {ScalarField::constant(mesh, 1.0)};
    p.initial = cell_averages(mesh, [](const Vec2& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); });
    const auto res = run(p, 1e-11);
    return {res.monitor.recursion_violations() == 0 && res.monitor.records.size() == K + 1,
            fmt("K=%d, 8x8, L(gamma)=%.4f, C dt=%.4f: %d violations", K, p.lipschitz.gamma,
                res.monitor.c_dt, res.monitor.recursion_violations())};
}

Outcome increment_boundedness()
{
    const auto a = run(draining_problem(8, 0.5, 50), 1e-11).monitor.records.back().increment_sum;
    const auto b = run(draining_problem(8, 0.5, 100), 1e-11).monitor.records.back().increment_sum;
    const double ratio = std::max(a, b) / std::min(a, b);
    return {ratio <= 1.5, fmt("increment sum K=50: %.5f, K=100: %.5f, ratio %.4f", a, b, ratio)};
}

Outcome primal_equivalence()
{
    const auto mc = sine_case(1.0, 1.0);
    std::vector<double> C, gap, h;
    for (int n : {8, 16, 32}) {
        auto mesh = build_structured_mesh(n, n);
        auto sys = mc.system(mesh);
        sys.boundary = BoundaryData(mesh);
        const auto st = solve_stationary(sys, {}, 1e-11).first;
        keep(sys, st);
        const auto primal = primal_oracle(primal_problem(sys), triangulate(mesh), 1e-12);
        gap.push_back(lp_norm(st.second - primal_cell_averages(mesh, primal.nodal), 1.5));
        h.push_back(mesh->h());
        C.push_back(gap.back() / h.back());
    }
    const double mean = (C[0] + C[1] + C[2]) / 3.0;
    double spread = 0.0;
    for (double c : C)
        spread = std::max(spread, std::abs(c - mean) / mean);
    return {spread <= 0.3, fmt("gap/h = %.4f, %.4f, %.4f (spread %.0f%% of mean); gap order %.2f", C[0],
                               C[1], C[2], 100 * spread, loglog_slope(h, gap))};
}

Outcome convergence()
{
    const std::vector<int> meshes{4, 8, 16, 32};
    const auto lin = convergence_study(sine_case(1.0, 0.0), meshes, {}, 1e-10);
    const auto non = convergence_study(sine_case(1.0, 1.0), meshes, {}, 1e-10);
    return {lin.order_S >= 0.9 && lin.order_m >= 0.9 && non.order_S >= 0.8,
            fmt("Darcy orders S %.3f m %.3f; nonlinear S %.3f (m %.3f)", lin.order_S, lin.order_m,
                non.order_S, non.order_m)};
}

Outcome jacobian()
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    auto mesh = build_structured_mesh(2, 2);
    double worst = 0.0;
    for (int mode = 0; mode < 3; ++mode) {
        auto sys = make_system(mesh, CoefficientField::constant(mesh, 0.8, 1.4), ScalarField::constant(mesh, 0.5),
                               sample_boundary(mesh, [](const Vec2& x) { return x[0]; }));
        sys.smoothing_delta = 1e-6;
        sys.eps = mode == 0 ? 0.3 : 0.0;
        if (mode == 2) {
            sys.time_weight = 4.0;
            sys.prev_S = ScalarField::constant(mesh, 1.0);
            sys.prev_gamma = ScalarField::constant(mesh, 1.0);
            sys.eps = 0.2;
        }
        for (int trial = 0; trial < 10; ++trial) {
            Vector x(static_cast<Eigen::Index>(sys.size()));
            for (auto& v : x)
                v = u(rng);
            const Eigen::MatrixXd J = linearize(sys, x).jacobian;
            Eigen::MatrixXd fd(x.size(), x.size());
            const double step = 1e-6;
            for (Eigen::Index j = 0; j < x.size(); ++j) {
                Vector xp = x, xm = x;
                xp[j] += step;
                xm[j] -= step;
                fd.col(j) = (residual(sys, xp) - residual(sys, xm)) / (2 * step);
            }
            worst = std::max(worst, (fd - J).norm() / J.norm());
        }
    }
    return {worst <= 1e-5, fmt("30 random states on 2x2, max relative deviation %.3e", worst)};
}

std::set<int> parse_ids(const char* s)
{
    std::set<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty())
            out.insert(std::stoi(tok));
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    std::set<int> only, unattainable;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--only") && i + 1 < argc)
            only = parse_ids(argv[++i]);
        else if (!std::strcmp(argv[i], "--known-unattainable") && i + 1 < argc)
            unattainable = parse_ids(argv[++i]);
        else {
            std::fprintf(stderr, "usage: %s [--only N,...] [--known-unattainable N,...]\n", argv[0]);
            return 2;
        }
    }

    // Order matters: criterion 7 checks the stationary solutions collected before it.
    const std::vector<Criterion> criteria = {
        {1, "inequality suite", 5, inequality_suite},
        {2, "closure round trip", 1, closure_round_trip},
        {3, "discrete monotonicity", 10, discrete_monotonicity},
        {4, "linear-limit oracle", 30, linear_limit},
        {5, "continuation stability", 60, continuation_stability},
        {6, "uniqueness probe", 60, uniqueness},
        {10, "mixed/primal equivalence", 180, primal_equivalence},
        {7, "mass balance", 60, mass_balance},
        {8, "per-step energy recursion", 120, recursion},
        {9, "dt-refinement boundedness", 180, increment_boundedness},
        {11, "convergence study", 300, convergence},
        {12, "Jacobian check", 10, jacobian},
    };

    std::set<int> failed;
    std::vector<std::string> lines(13);
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id) && !(c.id != 7 && only.count(7)))
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs >= c.time_limit) {
            o.pass = false;
            o.detail += fmt("; runtime limit %.0f s exceeded", c.time_limit);
        }
        if (!only.empty() && !only.count(c.id))
            continue;
        if (!o.pass)
            failed.insert(c.id);
        lines[c.id] = fmt("%s  %2d  %-28s %7.2f s  ", o.pass ? "PASS" : "FAIL", c.id, c.name, secs) + o.detail;
    }
    for (const auto& l : lines)
        if (!l.empty())
            std::printf("%s\n", l.c_str());

    std::set<int> expected;
    for (int id : unattainable)
        if (only.empty() || only.count(id))
            expected.insert(id);
    std::printf("%zu criteria failed", failed.size());
    if (!expected.empty()) {
        std::printf(" (declared unattainable:");
        for (int id : expected)
            std::printf(" %d", id);
        std::printf(")");
    }
    std::printf("\n");
    return failed == expected ? 0 : 1;
}
