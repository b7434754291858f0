#pragma once

// Stationary solves: damped Newton for fixed eps, eps-continuation down to eps = 0,
// and the divergence-free solve for source-free problems.

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCholesky>

#include "dfmix/assembly.hpp"

namespace dfmix {

struct ContinuationSchedule {
    double eps0 = 1.0;
    double factor = 0.25;
    int max_stages = 16;
    /// <= 0 selects 1e-6 * (1 + data norm).
    double stage_tol = 0.0;

    void validate() const
    {
        detail::require(eps0 > 0.0, "ContinuationSchedule: eps0 must be positive");
        detail::require(factor > 0.0 && factor < 1.0, "ContinuationSchedule: factor must lie in (0,1)");
        detail::require(max_stages >= 1, "ContinuationSchedule: max_stages must be >= 1");
    }
};

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 60;
    double armijo = 1e-4;
    double min_step = 1.0 / 1024.0;
    int picard_sweeps = 5;
};

struct StageRecord {
    double eps = 0.0;
    int newton_iters = 0;
    int picard_sweeps = 0;
    double final_residual = 0.0;
    std::vector<double> residual_history;
    double m_norm = 0.0;   // ||m||_{W^3(div)}
    double S_norm = 0.0;   // ||S||_{3/2}
    /// ||m - m_prev||_{W^3(div)} + ||S - S_prev||_{3/2}; NaN for the first stage.
    double distance = std::numeric_limits<double>::quiet_NaN();
};

struct MonitoredNorms {
    double m_w3div = 0.0;
    double S_32 = 0.0;
    /// ||div m - f||_{3/2}
    double div_defect = 0.0;
};

struct SolveReport {
    bool converged = false;
    std::vector<StageRecord> stages;
    MonitoredNorms norms;
    double stage_tol = 0.0;
    double wall_time = 0.0;
    std::string message;
};

using MixedState = std::pair<FluxField, ScalarField>;

class NonconvergenceError : public std::runtime_error {
public:
    NonconvergenceError(const std::string& what, SolveReport report)
        : std::runtime_error(what), report_(std::move(report)) {}
    const SolveReport& report() const noexcept { return report_; }

private:
    SolveReport report_;
};

/// Line search and Picard fallback both failed to reduce the residual.
class StagnationError : public NonconvergenceError {
public:
    using NonconvergenceError::NonconvergenceError;
};

/// The eps schedule ran out before successive stages agreed to stage_tol.
class ContinuationError : public NonconvergenceError {
public:
    ContinuationError(const std::string& what, SolveReport report, std::vector<MixedState> stages)
        : NonconvergenceError(what, std::move(report)), stages_(std::move(stages)) {}
    const std::vector<MixedState>& stage_solutions() const noexcept { return stages_; }

private:
    std::vector<MixedState> stages_;
};

inline double state_distance(const MixedState& a, const MixedState& b)
{
    return ws_div_norm(a.first - b.first, 3.0) + lp_norm(a.second - b.second, 1.5);
}

inline MonitoredNorms monitor_norms(const MixedSystem& sys, const MixedState& st)
{
    MonitoredNorms n;
    n.m_w3div = ws_div_norm(st.first, 3.0);
    n.S_32 = lp_norm(st.second, 1.5);
    n.div_defect = lp_norm(divergence(st.first) - sys.source, 1.5);
    return n;
}

/// Size of the data: ||f||_{3/2} + max |S_b|.
inline double data_norm(const MixedSystem& sys)
{
    double sb = 0.0;
    for (double v : sys.boundary.values())
        sb = std::max(sb, std::abs(v));
    return lp_norm(sys.source, 1.5) + sb;
}

namespace detail {

/// Damped Newton on the residual norm with a Picard fallback. Fills `rec`.
inline Vector newton_solve(const MixedSystem& sys, Vector x, const NewtonOptions& opt,
                           StageRecord& rec)
{
    SparseDirectSolver lu;
    Vector r = residual(sys, x);
    double rn = residual_norm(r);
    rec.eps = sys.eps;
    rec.residual_history.push_back(rn);

    auto try_step = [&](const Vector& dx) {
        for (double t = 1.0; t >= opt.min_step; t *= 0.5) {
            Vector xt = x + t * dx;
            Vector rt = residual(sys, xt);
            const double nt = residual_norm(rt);
            if (std::isfinite(nt) && nt <= (1.0 - opt.armijo * t) * rn) {
                x = std::move(xt);
                r = std::move(rt);
                rn = nt;
                return true;
            }
        }
        return false;
    };

    while (rn > opt.tol) {
        if (rec.newton_iters >= opt.max_iter)
            throw NonconvergenceError("Newton: iteration limit reached (eps = " +
                                          std::to_string(sys.eps) + ", residual = " +
                                          std::to_string(rn) + ")",
                                      SolveReport{false, {rec}, {}, 0.0, 0.0, "max_iter"});
        ++rec.newton_iters;
        const auto lin = linearize(sys, x, Linearization::newton);
        bool ok = false;
        try {
            ok = try_step(lu.solve(lin.jacobian, -r));
        } catch (const ConditioningError&) {
            ok = false;
        }
        if (!ok) {
            SparseDirectSolver plu;
            for (int s = 0; s < opt.picard_sweeps && rn > opt.tol; ++s) {
                ++rec.picard_sweeps;
                const auto pl = linearize(sys, x, Linearization::picard);
                if (!try_step(plu.solve(pl.jacobian, -r)))
                    break;
                ok = true;
                rec.residual_history.push_back(rn);
            }
            if (!ok)
                throw StagnationError("Newton: line search and Picard fallback stalled at residual " +
                                          std::to_string(rn),
                                      SolveReport{false, {rec}, {}, 0.0, 0.0, "stagnation"});
            continue;
        }
        rec.residual_history.push_back(rn);
    }
    rec.final_residual = rn;
    return x;
}

/// Solution of the linear Darcy problem (beta = 0, eps = 0) on the same data; starting
/// guess for continuation, where Newton from S = 0 crawls on the square-root terms.
inline Vector linear_initial_guess(const MixedSystem& sys)
{
    if (sys.semi_discrete())
        return Vector::Zero(static_cast<Eigen::Index>(sys.size()));
    MixedSystem lin = sys;
    lin.eps = 0.0;
    lin.coeffs.beta = ScalarField::zeros(sys.mesh);
    lin.coeffs.beta_bounds = {0.0, 0.0};
    const Vector zero = Vector::Zero(static_cast<Eigen::Index>(sys.size()));
    const auto l = linearize(lin, zero, Linearization::picard);
    try {
        return SparseDirectSolver{}.solve(l.jacobian, -l.residual);
    } catch (const ConditioningError&) {
        return zero;
    }
}

inline void finish_stage(StageRecord& rec, const MixedState& st)
{
    rec.m_norm = ws_div_norm(st.first, 3.0);
    rec.S_norm = lp_norm(st.second, 1.5);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

/// Newton solve of the regularized problem at sys.eps > 0.
inline std::pair<MixedState, SolveReport> solve_regularized(const MixedSystem& sys,
                                                            const MixedState& initial, double tol,
                                                            int max_iter = 60)
{
    sys.validate();
    detail::require(sys.eps > 0.0, "solve_regularized: eps must be positive");
    detail::require(tol > 0.0, "solve_regularized: tol must be positive");
    detail::require(max_iter >= 1, "solve_regularized: max_iter must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();
    NewtonOptions opt;
    opt.tol = tol;
    opt.max_iter = max_iter;
    StageRecord rec;
    const Vector x = detail::newton_solve(sys, pack_state(initial.first, initial.second), opt, rec);
    MixedState st = unpack_state(sys.mesh, x);
    detail::finish_stage(rec, st);
    SolveReport rep;
    rep.converged = true;
    rep.stages.push_back(rec);
    rep.norms = monitor_norms(sys, st);
    rep.wall_time = detail::seconds_since(t0);
    return {std::move(st), std::move(rep)};
}

/// eps-continuation from schedule.eps0 followed by a polishing solve at eps = 0.
inline std::pair<MixedState, SolveReport> solve_stationary(const MixedSystem& sys,
                                                           const ContinuationSchedule& schedule,
                                                           double tol,
                                                           std::optional<MixedState> initial = {},
                                                           int max_iter = 60)
{
    schedule.validate();
    detail::require(tol > 0.0, "solve_stationary: tol must be positive");
    MixedSystem work = sys;
    work.eps = schedule.eps0;
    work.validate();
    const auto t0 = std::chrono::steady_clock::now();

    SolveReport rep;
    rep.stage_tol = schedule.stage_tol > 0.0 ? schedule.stage_tol : 1e-6 * (1.0 + data_norm(sys));
    NewtonOptions opt;
    opt.tol = tol;
    opt.max_iter = max_iter;

    Vector x = initial ? pack_state(initial->first, initial->second)
                       : detail::linear_initial_guess(sys);
    std::vector<MixedState> stages;
    bool settled = false;
    for (int k = 0; k < schedule.max_stages; ++k) {
        StageRecord rec;
        try {
            x = detail::newton_solve(work, x, opt, rec);
        } catch (const NonconvergenceError& e) {
            rep.stages.push_back(e.report().stages.front());
            rep.message = e.what();
            rep.wall_time = detail::seconds_since(t0);
            throw ContinuationError(std::string("continuation stage failed: ") + e.what(), rep,
                                    stages);
        }
        MixedState st = unpack_state(sys.mesh, x);
        detail::finish_stage(rec, st);
        if (!stages.empty())
            rec.distance = state_distance(st, stages.back());
        rep.stages.push_back(rec);
        stages.push_back(std::move(st));
        if (schedule.max_stages == 1 || (k > 0 && rec.distance <= rep.stage_tol)) {
            settled = true;
            break;
        }
        work.eps *= schedule.factor;
    }
    if (!settled) {
        rep.message = "continuation schedule exhausted before stage_tol was met";
        rep.wall_time = detail::seconds_since(t0);
        throw ContinuationError(rep.message, rep, std::move(stages));
    }

    work.eps = 0.0;
    StageRecord rec;
    try {
        x = detail::newton_solve(work, x, opt, rec);
    } catch (const NonconvergenceError& e) {
        rep.stages.push_back(e.report().stages.front());
        rep.message = e.what();
        rep.wall_time = detail::seconds_since(t0);
        throw ContinuationError(std::string("eps = 0 solve failed: ") + e.what(), rep,
                                std::move(stages));
    }
    MixedState st = unpack_state(sys.mesh, x);
    detail::finish_stage(rec, st);
    rec.distance = state_distance(st, stages.back());
    rep.stages.push_back(rec);
    rep.converged = true;
    rep.norms = monitor_norms(sys, st);
    rep.wall_time = detail::seconds_since(t0);
    return {std::move(st), std::move(rep)};
}

/// Stream-function basis of the discrete divergence-free fluxes: flux_e = psi(v1) - psi(v0),
/// with psi fixed to 0 at vertex 0.
inline SparseMatrix divergence_free_basis(const Mesh& mesh)
{
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
        const auto& v = mesh.edges[e].vertices;
        if (v[1] > 0)
            t.emplace_back(static_cast<int>(e), v[1] - 1, 1.0);
        if (v[0] > 0)
            t.emplace_back(static_cast<int>(e), v[0] - 1, -1.0);
    }
    SparseMatrix Z(static_cast<Eigen::Index>(mesh.num_edges()),
                   static_cast<Eigen::Index>(mesh.num_vertices() - 1));
    Z.setFromTriplets(t.begin(), t.end());
    return Z;
}

/// Source-free problem solved on div m = 0 without regularization; S from the flux equation.
inline std::pair<MixedState, SolveReport> solve_homogeneous_divfree(const MixedSystem& sys,
                                                                    double tol, int max_iter = 60)
{
    sys.validate();
    detail::require(tol > 0.0, "solve_homogeneous_divfree: tol must be positive");
    detail::require(!sys.semi_discrete(), "solve_homogeneous_divfree: stationary problems only");
    for (double f : sys.source.values())
        detail::require(f == 0.0, "solve_homogeneous_divfree: source must vanish");
    const auto t0 = std::chrono::steady_clock::now();
    MixedSystem work = sys;
    work.eps = 0.0;

    const Mesh& mesh = *sys.mesh;
    const SparseMatrix Z = divergence_free_basis(mesh);
    const SparseMatrix Zt = Z.transpose();
    const Vector g = boundary_vector(work);
    const auto ne = static_cast<Eigen::Index>(mesh.num_edges());

    auto flux_residual = [&](const Vector& psi) {
        const Vector m = Z * psi;
        return Vector(Zt * (apply_A(work, {m.data(), static_cast<std::size_t>(ne)}) - g));
    };
    auto a_block = [&](const Vector& m) {
        Vector x = Vector::Zero(static_cast<Eigen::Index>(work.size()));
        x.head(ne) = m;
        const SparseMatrix J = linearize(work, x).jacobian;
        return SparseMatrix(J.topLeftCorner(ne, ne));
    };

    StageRecord rec;
    rec.eps = 0.0;
    Vector psi = Vector::Zero(Z.cols());
    Vector r = flux_residual(psi);
    const double scale = std::sqrt(static_cast<double>(work.size()));
    double rn = r.norm() / scale;
    rec.residual_history.push_back(rn);
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    while (rn > tol) {
        if (rec.newton_iters >= max_iter)
            throw NonconvergenceError("divergence-free Newton: iteration limit reached",
                                      SolveReport{false, {rec}, {}, 0.0, 0.0, "max_iter"});
        ++rec.newton_iters;
        const SparseMatrix H = Zt * a_block(Z * psi) * Z;
        ldlt.compute(H);
        if (ldlt.info() != Eigen::Success)
            throw ConditioningError("divergence-free Newton: factorization failed");
        const Vector dpsi = ldlt.solve(-r);
        bool ok = false;
        for (double t = 1.0; t >= 1.0 / 1024.0; t *= 0.5) {
            const Vector pt = psi + t * dpsi;
            const Vector rt = flux_residual(pt);
            const double nt = rt.norm() / scale;
            if (nt <= (1.0 - 1e-4 * t) * rn) {
                psi = pt;
                r = rt;
                rn = nt;
                ok = true;
                break;
            }
        }
        if (!ok)
            throw StagnationError("divergence-free Newton: line search stalled",
                                  SolveReport{false, {rec}, {}, 0.0, 0.0, "stagnation"});
        rec.residual_history.push_back(rn);
    }
    rec.final_residual = rn;

    const Vector m = Z * psi;
    const SparseMatrix B = divergence_matrix(mesh);
    const Vector rhs = B * (apply_A(work, {m.data(), static_cast<std::size_t>(ne)}) - g);
    Eigen::SimplicialLDLT<SparseMatrix> bb(SparseMatrix(B * B.transpose()));
    if (bb.info() != Eigen::Success)
        throw ConditioningError("divergence-free solve: B B^T factorization failed");
    const Vector S = bb.solve(rhs);

    MixedState st{FluxField(sys.mesh, {m.data(), m.data() + m.size()}),
                  ScalarField(sys.mesh, {S.data(), S.data() + S.size()})};
    detail::finish_stage(rec, st);
    SolveReport rep;
    rep.converged = true;
    rep.stages.push_back(rec);
    rep.norms = monitor_norms(sys, st);
    rep.wall_time = detail::seconds_since(t0);
    return {std::move(st), std::move(rep)};
}

} // namespace dfmix
