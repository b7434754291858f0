#pragma once

// Implicit Euler in time for
//   (alpha^k + beta^k |m^k|) m^k + grad S^k = 0
//   phi (rho^k(S^k) - rho^{k-1}(S^{k-1})) / dt + div m^k = f^k
// with each step solved as a semi-discrete mixed problem.

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dfmix/stationary.hpp"

namespace dfmix {

struct TimeGrid {
    double horizon = 1.0;
    int steps = 1;

    double dt() const { return horizon / steps; }
    double time(int k) const { return horizon * k / steps; }

    void validate() const
    {
        detail::require(horizon > 0.0 && std::isfinite(horizon), "TimeGrid: T must be positive");
        detail::require(steps >= 1, "TimeGrid: K must be >= 1");
    }
};

struct LipschitzConstants {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double f = 0.0;
};

/// Data of the transient problem. Each trajectory holds either one entry (constant in
/// time) or K + 1 entries indexed by step k = 0..K.
struct TransientProblem {
    MeshPtr mesh;
    TimeGrid time;
    std::vector<CoefficientField> coeffs;
    std::vector<ScalarField> sources;
    /// Empty: homogeneous at every step.
    std::vector<BoundaryData> boundary;
    ScalarField initial;
    LipschitzConstants lipschitz;

    const CoefficientField& coeffs_at(int k) const { return pick(coeffs, k); }
    const ScalarField& source_at(int k) const { return pick(sources, k); }
    BoundaryData boundary_at(int k) const
    {
        return boundary.empty() ? BoundaryData(mesh) : pick(boundary, k);
    }

    bool homogeneous() const
    {
        return std::all_of(boundary.begin(), boundary.end(),
                           [](const BoundaryData& b) { return b.homogeneous(); });
    }

    /// phi lower bound, gamma lower bound over all steps.
    std::pair<double, double> lower_bounds() const
    {
        double phi = coeffs.front().phi_bounds.lower;
        double gamma = coeffs.front().gamma_bounds.lower;
        for (const auto& c : coeffs) {
            phi = std::min(phi, c.phi_bounds.lower);
            gamma = std::min(gamma, c.gamma_bounds.lower);
        }
        return {phi, gamma};
    }

    void validate() const
    {
        time.validate();
        detail::require(mesh != nullptr, "TransientProblem: null mesh");
        const auto K1 = static_cast<std::size_t>(time.steps) + 1;
        auto sized = [K1](std::size_t n) { return n == 1 || n == K1; };
        detail::require(sized(coeffs.size()), "TransientProblem: coefficient trajectory must have 1 or K+1 entries");
        detail::require(sized(sources.size()), "TransientProblem: source trajectory must have 1 or K+1 entries");
        detail::require(boundary.empty() || sized(boundary.size()),
                        "TransientProblem: boundary trajectory must have 0, 1 or K+1 entries");
        detail::require(initial.mesh() == mesh, "TransientProblem: S0 on another mesh");
        for (const auto& c : coeffs) {
            detail::require(c.mesh() == mesh, "TransientProblem: coefficients on another mesh");
            c.validate();
        }
        for (const auto& c : coeffs)
            for (std::size_t i = 0; i < c.phi.size(); ++i)
                detail::require(c.phi[i] == coeffs.front().phi[i],
                                "TransientProblem: porosity phi must not depend on time");
        for (const auto& s : sources)
            detail::require(s.mesh() == mesh, "TransientProblem: source on another mesh");
        for (const auto& b : boundary)
            detail::require(b.mesh() == mesh, "TransientProblem: boundary data on another mesh");
        detail::require(lipschitz.alpha >= 0 && lipschitz.beta >= 0 && lipschitz.gamma >= 0 &&
                            lipschitz.f >= 0,
                        "TransientProblem: Lipschitz constants must be nonnegative");

        // Consecutive-step differences bounded by L * dt.
        const double dt = time.dt();
        auto sup_diff = [](const ScalarField& a, const ScalarField& b) {
            double d = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i)
                d = std::max(d, std::abs(a[i] - b[i]));
            return d;
        };
        auto within = [dt](double diff, double L) { return diff <= L * dt * (1 + 1e-12) + 1e-14; };
        for (std::size_t k = 1; k < coeffs.size(); ++k) {
            const auto& a = coeffs[k - 1];
            const auto& b = coeffs[k];
            detail::require(within(sup_diff(a.alpha, b.alpha), lipschitz.alpha),
                            "TransientProblem: alpha violates its Lipschitz bound L(alpha) in time");
            detail::require(within(sup_diff(a.beta, b.beta), lipschitz.beta),
                            "TransientProblem: beta violates its Lipschitz bound L(beta) in time");
            detail::require(within(sup_diff(a.gamma, b.gamma), lipschitz.gamma),
                            "TransientProblem: gamma violates its Lipschitz bound L(gamma) in time");
        }
        for (std::size_t k = 1; k < sources.size(); ++k)
            detail::require(within(lp_norm(sources[k] - sources[k - 1], 3.0), lipschitz.f),
                            "TransientProblem: f violates its Lipschitz bound L(f) in time");
    }

private:
    template <class T>
    static const T& pick(const std::vector<T>& v, int k)
    {
        return v.size() == 1 ? v.front() : v.at(static_cast<std::size_t>(k));
    }
};

struct DtAdmissibility {
    bool admissible = false;
    double c_dt = 0.0;
};

/// C dt with C = 2 (1/(phi_min gamma_min) + L(gamma)/gamma_min); admissible iff C dt < 1.
inline DtAdmissibility check_dt_admissible(const TransientProblem& problem)
{
    const auto [phi, gamma] = problem.lower_bounds();
    const double C = 2.0 * (1.0 / (phi * gamma) + problem.lipschitz.gamma / gamma);
    const double c_dt = C * problem.time.dt();
    return {c_dt < 1.0, c_dt};
}

class StepError : public NonconvergenceError {
public:
    StepError(const std::string& what, SolveReport report, int step)
        : NonconvergenceError(what, std::move(report)), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

/// Weighted energy int phi gamma |S|^{3/2}.
inline double weighted_energy(const CoefficientField& c, const ScalarField& S)
{
    const Mesh& mesh = *S.mesh();
    double e = 0.0;
    for (std::size_t i = 0; i < mesh.num_cells(); ++i)
        e += mesh.cell_measures[i] * c.phi[i] * c.gamma[i] * std::pow(std::abs(S[i]), 1.5);
    return e;
}

/// int phi rho(S) with rho = gamma S / sqrt|S|.
inline double total_mass(const CoefficientField& c, const ScalarField& S)
{
    const Mesh& mesh = *S.mesh();
    double m = 0.0;
    for (std::size_t i = 0; i < mesh.num_cells(); ++i)
        m += mesh.cell_measures[i] * c.phi[i] * c.gamma[i] * signed_sqrt(S[i]);
    return m;
}

/// Net outward flux through the boundary.
inline double boundary_outflow(const FluxField& m)
{
    double s = 0.0;
    for (int e : m.mesh()->boundary_edges)
        s += m[e];
    return s;
}

/// Discrete W^{1,3/2} norm: cell values plus centroid-difference gradients across edges,
/// with S = 0 outside the domain.
inline double w1_surrogate(const ScalarField& S)
{
    const Mesh& mesh = *S.mesh();
    double s = std::pow(lp_norm(S, 1.5), 1.5);
    for (const auto& edge : mesh.edges) {
        const Cell& a = mesh.cells[edge.cells[0]];
        const Vec2 ca = a.centroid();
        double jump, dist;
        if (edge.cells[1] >= 0) {
            const Vec2 cb = mesh.cells[edge.cells[1]].centroid();
            dist = std::hypot(cb[0] - ca[0], cb[1] - ca[1]);
            jump = S[edge.cells[1]] - S[edge.cells[0]];
        } else {
            dist = std::hypot(edge.midpoint[0] - ca[0], edge.midpoint[1] - ca[1]);
            jump = S[edge.cells[0]];
        }
        s += edge.length * dist * std::pow(std::abs(jump) / dist, 1.5);
    }
    return std::pow(s, 2.0 / 3.0);
}

/// m = -F(grad S) with grad S the normal difference quotient across each edge (S = 0
/// outside); coefficients averaged over the adjacent cells.
inline FluxField initial_flux(const CoefficientField& c, const ScalarField& S)
{
    const Mesh& mesh = *S.mesh();
    std::vector<double> m(mesh.num_edges());
    for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
        const Edge& edge = mesh.edges[e];
        const int i = edge.cells[0], j = edge.cells[1];
        const Vec2 ca = mesh.cells[i].centroid();
        double al = c.alpha[i], be = c.beta[i], grad;
        if (j >= 0) {
            const Vec2 cb = mesh.cells[j].centroid();
            grad = (S[j] - S[i]) / std::hypot(cb[0] - ca[0], cb[1] - ca[1]);
            al = 0.5 * (al + c.alpha[j]);
            be = 0.5 * (be + c.beta[j]);
        } else {
            grad = -S[i] / std::hypot(edge.midpoint[0] - ca[0], edge.midpoint[1] - ca[1]);
        }
        m[e] = -edge.length * std::copysign(f_closure_magnitude(al, be, std::abs(grad)), grad);
    }
    return {S.mesh(), std::move(m)};
}

/// Semi-discrete system of step k around the previous scalar field.
inline MixedSystem step_system(const TransientProblem& problem, int k, const ScalarField& prev_S)
{
    MixedSystem sys;
    sys.mesh = problem.mesh;
    sys.coeffs = problem.coeffs_at(k);
    sys.boundary = problem.boundary_at(k);
    sys.source = problem.source_at(k);
    sys.time_weight = 1.0 / problem.time.dt();
    sys.prev_S = prev_S;
    sys.prev_gamma = problem.coeffs_at(k - 1).gamma;
    return sys;
}

/// Default per-step schedule. Inside a time step div m scales like 1/dt, so the d_eps
/// term needs more stages to die out on the first step than in the stationary default.
inline ContinuationSchedule transient_schedule()
{
    ContinuationSchedule s;
    s.max_stages = 24;
    return s;
}

struct StepOptions {
    ContinuationSchedule schedule = transient_schedule();
    /// Start of this step's eps sequence; <= 0 uses schedule.eps0.
    double eps_start = 0.0;
    /// Defaults to (0, S^{k-1}).
    std::optional<MixedState> warm_start;
};

struct StepResult {
    MixedState state;
    SolveReport report;
    /// Smallest positive eps reached by the continuation.
    double eps_floor = 0.0;
};

/// One implicit Euler step (1 <= k <= K): continuation in eps on the d_eps term, then eps = 0.
inline StepResult step(const TransientProblem& problem, int k, const ScalarField& prev_S,
                       double tol, const StepOptions& opt = {})
{
    detail::require(k >= 1 && k <= problem.time.steps, "step: k must lie in 1..K");
    detail::require(prev_S.mesh() == problem.mesh, "step: previous S on another mesh");
    ContinuationSchedule sched = opt.schedule;
    if (opt.eps_start > 0.0)
        sched.eps0 = opt.eps_start;
    const MixedSystem sys = step_system(problem, k, prev_S);
    try {
        const MixedState start =
            opt.warm_start ? *opt.warm_start : MixedState{FluxField::zeros(problem.mesh), prev_S};
        auto [st, rep] = solve_stationary(sys, sched, tol, start);
        double floor = sched.eps0;
        for (const auto& s : rep.stages)
            if (s.eps > 0.0)
                floor = std::min(floor, s.eps);
        return {std::move(st), std::move(rep), floor};
    } catch (const NonconvergenceError& e) {
        throw StepError("time step " + std::to_string(k) + ": " + e.what(), e.report(), k);
    }
}

struct StepRecord {
    int step = 0;
    double time = 0.0;
    /// int phi gamma^k |S^k|^{3/2}
    double energy = 0.0;
    /// ||m^k||_{0,3}
    double flux_norm = 0.0;
    /// sum_{i<=k} dt ||(S^i - S^{i-1})/dt||_{3/2}^{3/2}
    double increment_sum = 0.0;
    /// discrete ||S^k||_{1,3/2}
    double w1_norm = 0.0;
    /// int phi rho^k(S^k)
    double mass = 0.0;
    /// mass^k - mass^{k-1} + dt (outflow^k - int f^k)
    double mass_defect = 0.0;
    /// (energy^{k-1} + dt ||f^k||_{0,3}^3) / (1 - C dt)
    double recursion_bound = 0.0;
    bool recursion_ok = true;
    int newton_iters = 0;
};

struct BoundMonitor {
    double c_dt = 0.0;
    std::vector<StepRecord> records;

    int recursion_violations() const
    {
        return static_cast<int>(std::count_if(records.begin(), records.end(),
                                              [](const StepRecord& r) { return !r.recursion_ok; }));
    }
    double max_abs_mass_defect() const
    {
        double d = 0.0;
        for (const auto& r : records)
            d = std::max(d, std::abs(r.mass_defect));
        return d;
    }
    double cumulative_mass_defect() const
    {
        double d = 0.0;
        for (const auto& r : records)
            d += r.mass_defect;
        return d;
    }
};

inline void write_monitor_csv(std::ostream& os, const BoundMonitor& mon)
{
    os << "schema = 1\n";
    os << "step,time,energy,flux_norm,increment_sum,w1_norm,mass,mass_defect,recursion_bound,"
          "recursion_ok\n";
    os.precision(17);
    for (const auto& r : mon.records)
        os << r.step << ',' << r.time << ',' << r.energy << ',' << r.flux_norm << ','
           << r.increment_sum << ',' << r.w1_norm << ',' << r.mass << ',' << r.mass_defect << ','
           << r.recursion_bound << ',' << (r.recursion_ok ? 1 : 0) << '\n';
}

class Trajectory {
public:
    Trajectory(TimeGrid grid, std::vector<MixedState> states)
        : grid_(grid), states_(std::move(states)) {}

    const TimeGrid& grid() const { return grid_; }
    const std::vector<MixedState>& states() const { return states_; }
    const MixedState& at_step(int k) const { return states_.at(static_cast<std::size_t>(k)); }

    /// Step index k with (k-1) dt < t <= k dt (0 at t = 0).
    int step_index(double t) const
    {
        detail::require(t >= 0.0 && t <= grid_.horizon * (1 + 1e-14), "Trajectory: t outside [0,T]");
        if (t <= 0.0)
            return 0;
        const int k = static_cast<int>(std::ceil(t / grid_.dt() - 1e-12));
        return std::clamp(k, 1, grid_.steps);
    }

    /// Piecewise constant in time.
    const MixedState& piecewise_constant(double t) const { return at_step(step_index(t)); }

    /// Piecewise linear in time through (t^k, S^k).
    ScalarField piecewise_linear(double t) const
    {
        const int k = step_index(t);
        if (k == 0)
            return states_.front().second;
        const double theta = (t - grid_.time(k - 1)) / grid_.dt();
        return axpy(theta, states_[k].second - states_[k - 1].second, states_[k - 1].second);
    }

    /// (S^k - S^{k-1}) / dt on the interval containing t.
    ScalarField derivative(double t) const
    {
        const int k = std::max(1, step_index(t));
        std::vector<double> d(states_[k].second.size());
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] = (states_[k].second[i] - states_[k - 1].second[i]) / grid_.dt();
        return {states_[k].second.mesh(), std::move(d)};
    }

private:
    TimeGrid grid_;
    std::vector<MixedState> states_;
};

struct RunResult {
    Trajectory trajectory;
    BoundMonitor monitor;
    std::vector<SolveReport> reports;
};

/// Full time loop; homogeneous boundary data and C dt < 1 are required.
inline RunResult run(const TransientProblem& problem, double tol,
                     const ContinuationSchedule& schedule = transient_schedule())
{
    problem.validate();
    detail::require(tol > 0.0, "run: tol must be positive");
    detail::require(problem.homogeneous(),
                    "run: the time loop requires homogeneous Dirichlet data (S_b = 0)");
    const auto adm = check_dt_admissible(problem);
    detail::require(adm.admissible, "run: time step too large, C dt = " +
                                        std::to_string(adm.c_dt) + " must be < 1");
    const double dt = problem.time.dt();

    std::vector<MixedState> states;
    states.emplace_back(initial_flux(problem.coeffs_at(0), problem.initial), problem.initial);
    BoundMonitor mon;
    mon.c_dt = adm.c_dt;
    std::vector<SolveReport> reports;

    StepRecord r0;
    r0.energy = weighted_energy(problem.coeffs_at(0), problem.initial);
    r0.flux_norm = flux_lp_norm(states.front().first, 3.0);
    r0.w1_norm = w1_surrogate(problem.initial);
    r0.mass = total_mass(problem.coeffs_at(0), problem.initial);
    r0.recursion_bound = r0.energy;
    mon.records.push_back(r0);

    StepOptions opt;
    opt.schedule = schedule;
    for (int k = 1; k <= problem.time.steps; ++k) {
        const MixedState& prev = states.back();
        opt.warm_start = prev;
        auto res = step(problem, k, prev.second, tol, opt);
        opt.eps_start = res.eps_floor;

        const auto& c = problem.coeffs_at(k);
        const auto& f = problem.source_at(k);
        const StepRecord& last = mon.records.back();
        StepRecord rec;
        rec.step = k;
        rec.time = problem.time.time(k);
        rec.energy = weighted_energy(c, res.state.second);
        rec.flux_norm = flux_lp_norm(res.state.first, 3.0);
        const auto dS = res.state.second - prev.second;
        rec.increment_sum = last.increment_sum + dt * std::pow(lp_norm(dS, 1.5) / dt, 1.5);
        rec.w1_norm = w1_surrogate(res.state.second);
        rec.mass = total_mass(c, res.state.second);
        double source = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i)
            source += problem.mesh->cell_measures[i] * f[i];
        rec.mass_defect = rec.mass - last.mass + dt * (boundary_outflow(res.state.first) - source);
        rec.recursion_bound =
            (last.energy + dt * std::pow(lp_norm(f, 3.0), 3.0)) / (1.0 - adm.c_dt);
        rec.recursion_ok = rec.energy <= rec.recursion_bound * (1 + 1e-12) + 1e-300;
        for (const auto& s : res.report.stages)
            rec.newton_iters += s.newton_iters;
        mon.records.push_back(rec);
        reports.push_back(std::move(res.report));
        states.push_back(std::move(res.state));
    }
    return {Trajectory(problem.time, std::move(states)), std::move(mon), std::move(reports)};
}

} // namespace dfmix
