#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "dfmix/stationary.hpp"

using namespace dfmix;

namespace {

MixedSystem make(const MeshPtr& mesh, double alpha, double beta, double eps = 0.0)
{
    MixedSystem sys;
    sys.mesh = mesh;
    sys.coeffs = CoefficientField::constant(mesh, alpha, beta);
    sys.boundary = BoundaryData(mesh);
    sys.source = ScalarField::zeros(mesh);
    sys.eps = eps;
    return sys;
}

MixedState zero_state(const MeshPtr& mesh)
{
    return {FluxField::zeros(mesh), ScalarField::zeros(mesh)};
}

MixedState random_state(const MeshPtr& mesh, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> m(mesh->num_edges()), s(mesh->num_cells());
    for (auto& v : m)
        v = u(rng);
    for (auto& v : s)
        v = u(rng);
    return {FluxField(mesh, m), ScalarField(mesh, s)};
}

double max_diff(std::span<const double> a, std::span<const double> b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// Dense linear saddle system built from the bilinear forms on basis functions.
Eigen::VectorXd dense_linear_solve(const MixedSystem& sys)
{
    const auto& mesh = sys.mesh;
    const auto ne = mesh->num_edges(), nc = mesh->num_cells();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(ne + nc, ne + nc);
    Eigen::VectorXd rhs(ne + nc);
    std::vector<FluxField> psi;
    for (std::size_t e = 0; e < ne; ++e) {
        auto f = FluxField::zeros(mesh);
        f.data()[e] = 1.0;
        psi.push_back(f);
    }
    std::vector<ScalarField> chi;
    for (std::size_t c = 0; c < nc; ++c) {
        auto q = ScalarField::zeros(mesh);
        q.data()[c] = 1.0;
        chi.push_back(q);
    }
    for (std::size_t i = 0; i < ne; ++i) {
        for (std::size_t j = 0; j < ne; ++j)
            K(i, j) = apply_a(sys, psi[j], psi[i]);
        for (std::size_t c = 0; c < nc; ++c) {
            K(i, ne + c) = -apply_b(psi[i], chi[c]);
            K(ne + c, i) = apply_b(psi[i], chi[c]);
        }
        rhs[i] = rhs_g(sys, psi[i]);
    }
    for (std::size_t c = 0; c < nc; ++c)
        rhs[ne + c] = rhs_f_tilde(sys, chi[c]);
    return K.fullPivLu().solve(rhs);
}

template <class F>
double bisect(F f, double lo, double hi)
{
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST(SolveRegularized, ZeroData)
{
    auto mesh = build_structured_mesh(3, 3);
    auto sys = make(mesh, 1, 1, 0.5);
    auto [st, rep] = solve_regularized(sys, zero_state(mesh), 1e-12);
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(ws_div_norm(st.first, 3), 0.0);
    EXPECT_EQ(lp_norm(st.second, 1.5), 0.0);
}

// Unit cell, S_b = 0, f = c: all four outward fluxes equal phi by symmetry and
//   S = 1/2 (alpha + sqrt2 beta |phi|) phi + 16 eps |phi| phi,
//   eps sqrt(S) + 4 phi = c.
TEST(SolveRegularized, SingleCellBisection)
{
    auto mesh = build_structured_mesh(1, 1);
    const double eps = 1e-3, c = 2.5;
    auto sys = make(mesh, 1, 1, eps);
    sys.source = ScalarField::constant(mesh, c);
    auto S_of = [&](double p) {
        return 0.5 * (1 + std::sqrt(2.0) * std::abs(p)) * p + 16 * eps * std::abs(p) * p;
    };
    const double phi = bisect([&](double p) { return eps * signed_sqrt(S_of(p)) + 4 * p - c; },
                              -10, 10);
    auto [st, rep] = solve_regularized(sys, zero_state(mesh), 1e-13);
    for (int i = 0; i < 4; ++i) {
        const auto& cell = mesh->cells[0];
        EXPECT_NEAR(cell.signs[i] * st.first[cell.edges[i]], phi, 1e-10);
    }
    EXPECT_NEAR(st.second[0], S_of(phi), 1e-10);
}

TEST(SolveRegularized, InitialGuessIndependent)
{
    std::mt19937_64 rng(12);
    auto mesh = build_structured_mesh(4, 4);
    auto sys = make(mesh, 1, 1, 1e-2);
    sys.source = sample_centroids(mesh, [](const Vec2& x) { return std::sin(3 * x[0]) - x[1]; });
    sys.boundary = sample_boundary(mesh, [](const Vec2& x) { return x[0] * x[1]; });
    const double tol = 1e-11;
    auto a = solve_regularized(sys, zero_state(mesh), tol).first;
    auto b = solve_regularized(sys, random_state(mesh, rng), tol).first;
    EXPECT_LE(state_distance(a, b), 10 * tol);
}

TEST(SolveRegularized, Contracts)
{
    auto mesh = build_structured_mesh(2, 2);
    EXPECT_THROW(solve_regularized(make(mesh, 1, 1, 0.0), zero_state(mesh), 1e-10), ContractError);
    EXPECT_THROW(solve_regularized(make(mesh, 1, 1, 1.0), zero_state(mesh), 0.0), ContractError);
}

TEST(SolveRegularized, IterationLimitReported)
{
    auto mesh = build_structured_mesh(4, 4);
    auto sys = make(mesh, 1, 1, 1e-3);
    sys.source = ScalarField::constant(mesh, 5);
    try {
        solve_regularized(sys, zero_state(mesh), 1e-14, 1);
        FAIL() << "expected nonconvergence";
    } catch (const NonconvergenceError& e) {
        EXPECT_FALSE(e.report().converged);
        EXPECT_GE(e.report().stages.front().residual_history.size(), 2u);
    }
}

TEST(SolveRegularized, ResidualDecreases)
{
    auto mesh = build_structured_mesh(6, 6);
    auto sys = make(mesh, 0.5, 3, 1e-2);
    sys.source = ScalarField::constant(mesh, 4);
    sys.boundary = sample_boundary(mesh, [](const Vec2& x) { return 2 * x[0] - 1; });
    auto [st, rep] = solve_regularized(sys, zero_state(mesh), 1e-12);
    const auto& h = rep.stages.front().residual_history;
    for (std::size_t i = 1; i < h.size(); ++i)
        EXPECT_LT(h[i], h[i - 1]);
}

TEST(SolveStationary, LinearLimitMatchesDenseSolve)
{
    auto mesh = build_structured_mesh(2, 2);
    auto sys = make(mesh, 1, 0);
    sys.source = ScalarField::constant(mesh, 1);
    auto [st, rep] = solve_stationary(sys, {}, 1e-13);
    const Eigen::VectorXd x = dense_linear_solve(sys);
    const Vector got = pack_state(st.first, st.second);
    EXPECT_LE((got - x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SolveStationary, MassBalanceAndStageRecords)
{
    auto mesh = build_structured_mesh(8, 8);
    auto sys = make(mesh, 1, 1);
    sys.source = sample_centroids(mesh, [](const Vec2& x) { return 1 + x[0]; });
    auto [st, rep] = solve_stationary(sys, {}, 1e-12);
    EXPECT_TRUE(rep.converged);
    const auto div = divergence(st.first);
    EXPECT_LE(max_diff(div.values(), sys.source.values()), 1e-12);
    EXPECT_GE(rep.stages.size(), 2u);
    EXPECT_EQ(rep.stages.back().eps, 0.0);
    EXPECT_LE(rep.norms.div_defect, 1e-12);
    for (std::size_t k = 1; k < rep.stages.size(); ++k)
        EXPECT_TRUE(std::isfinite(rep.stages[k].distance));
}

TEST(SolveStationary, SingleStageSchedule)
{
    auto mesh = build_structured_mesh(3, 3);
    auto sys = make(mesh, 1, 1);
    sys.source = ScalarField::constant(mesh, 1);
    ContinuationSchedule s;
    s.max_stages = 1;
    auto [st, rep] = solve_stationary(sys, s, 1e-12);
    ASSERT_EQ(rep.stages.size(), 2u);
    EXPECT_EQ(rep.stages[0].eps, 1.0);
    EXPECT_EQ(rep.stages[1].eps, 0.0);
}

TEST(SolveStationary, ScheduleExhausted)
{
    auto mesh = build_structured_mesh(3, 3);
    auto sys = make(mesh, 1, 1);
    sys.source = ScalarField::constant(mesh, 1);
    ContinuationSchedule s;
    s.max_stages = 3;
    s.stage_tol = 1e-30;
    try {
        solve_stationary(sys, s, 1e-12);
        FAIL() << "expected continuation failure";
    } catch (const ContinuationError& e) {
        EXPECT_EQ(e.stage_solutions().size(), 3u);
        EXPECT_EQ(e.report().stages.size(), 3u);
    }
}

TEST(SolveStationary, ScheduleValidation)
{
    auto mesh = build_structured_mesh(1, 1);
    ContinuationSchedule s;
    s.factor = 1.0;
    EXPECT_THROW(solve_stationary(make(mesh, 1, 1), s, 1e-10), ContractError);
    s = {};
    s.eps0 = 0;
    EXPECT_THROW(solve_stationary(make(mesh, 1, 1), s, 1e-10), ContractError);
}

TEST(SolveStationary, MultiStartAgreement)
{
    std::mt19937_64 rng(77);
    auto mesh = build_structured_mesh(5, 5);
    auto sys = make(mesh, 1, 2);
    sys.source = sample_centroids(mesh, [](const Vec2& x) { return x[0] - x[1] * x[1]; });
    sys.boundary = sample_boundary(mesh, [](const Vec2& x) { return 1 + x[0]; });
    const double tol = 1e-11;
    auto a = solve_stationary(sys, {}, tol).first;
    auto b = solve_stationary(sys, {}, tol, random_state(mesh, rng)).first;
    EXPECT_LE(state_distance(a, b), 10 * tol);
}

TEST(SolveStationary, LinearPressureReproduced)
{
    auto mesh = build_structured_mesh(4, 3);
    auto sys = make(mesh, 1, 1);
    auto S = [](const Vec2& x) { return 2.0 - 1.5 * x[0] + 0.5 * x[1]; };
    sys.boundary = sample_boundary(mesh, S);
    auto [st, rep] = solve_stationary(sys, {}, 1e-13);
    const auto exact = sample_centroids(mesh, S);
    EXPECT_LE(max_diff(st.second.values(), exact.values()), 1e-10);
    const Vec2 u = f_closure(sys.coeffs.at(0), {1.5, -0.5});
    const auto m = interpolate_flux(mesh, [u](const Vec2&) { return u; });
    EXPECT_LE(max_diff(st.first.fluxes(), m.fluxes()), 1e-10);
}

TEST(DivFree, Examples)
{
    auto mesh = build_structured_mesh(4, 4);
    auto sys = make(mesh, 1, 1);
    auto [z, r0] = solve_homogeneous_divfree(sys, 1e-12);
    EXPECT_EQ(ws_div_norm(z.first, 3), 0.0);
    EXPECT_EQ(lp_norm(z.second, 1.5), 0.0);

    sys.boundary = BoundaryData(mesh, std::vector<double>(mesh->boundary_edges.size(), 3.0));
    auto [c, r1] = solve_homogeneous_divfree(sys, 1e-12);
    EXPECT_LE(ws_div_norm(c.first, 3), 1e-12);
    for (double s : c.second.values())
        EXPECT_NEAR(s, 3.0, 1e-12);
}

TEST(DivFree, AgreesWithContinuation)
{
    auto mesh = build_structured_mesh(6, 6);
    auto sys = make(mesh, 1, 1);
    sys.boundary = sample_boundary(mesh, [](const Vec2& x) { return x[0] + 0.3 * x[0] * x[1]; });
    const double tol = 1e-11;
    auto a = solve_homogeneous_divfree(sys, tol).first;
    auto b = solve_stationary(sys, {}, tol).first;
    EXPECT_LE(state_distance(a, b), 10 * tol);
    const auto div = divergence(a.first);
    for (double d : div.values())
        EXPECT_NEAR(d, 0.0, 1e-12);
}

TEST(DivFree, RejectsSource)
{
    auto mesh = build_structured_mesh(2, 2);
    auto sys = make(mesh, 1, 1);
    sys.source = ScalarField::constant(mesh, 1);
    EXPECT_THROW(solve_homogeneous_divfree(sys, 1e-10), ContractError);
}

TEST(DivFree, BasisSpansKernel)
{
    auto mesh = build_structured_mesh(3, 4);
    const SparseMatrix Z = divergence_free_basis(*mesh);
    const SparseMatrix B = divergence_matrix(*mesh);
    EXPECT_EQ((Eigen::MatrixXd(B * Z)).norm(), 0.0);
    Eigen::FullPivLU<Eigen::MatrixXd> lu{Eigen::MatrixXd(Z)};
    EXPECT_EQ(lu.rank(), Z.cols());
    EXPECT_EQ(Z.rows() - Eigen::FullPivLU<Eigen::MatrixXd>(Eigen::MatrixXd(B)).rank(), Z.cols());
}
