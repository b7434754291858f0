#pragma once

// Independent checks of the mixed solver: a P1 primal minimization oracle, manufactured
// solutions with a convergence study, a discrete inf-sup estimate and randomized sweeps
// of the pointwise inequalities.

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfmix/stationary.hpp"

namespace dfmix {

// ---------------------------------------------------------------------------
// Scalar potential of the flux law.

/// Phi with Phi'(r) = |F| at |grad S| = r:
///   Phi(r) = ((alpha^2 + 4 beta r)^{3/2} - alpha^3) / (12 beta^2) - alpha r / (2 beta)
///          = 2 r^2 (2q + alpha) / (3 (q + alpha)^2),  q = sqrt(alpha^2 + 4 beta r).
inline double flux_potential(double alpha, double beta, double r)
{
    const double q = std::sqrt(alpha * alpha + 4.0 * beta * r);
    return 2.0 * r * r * (2.0 * q + alpha) / (3.0 * (q + alpha) * (q + alpha));
}

/// Max relative deviation of flux_potential from Gauss quadrature of Phi' on [0, r].
inline double check_flux_potential(double alpha, double beta, double r_max, int samples = 50)
{
    std::vector<double> gx, gw;
    detail::gauss_rule(4, gx, gw);
    double worst = 0.0;
    for (int s = 1; s <= samples; ++s) {
        const double r = r_max * s / samples;
        double integral = 0.0;
        // t = r u^2 smooths the square-root onset near t = 0.
        const int pieces = 256;
        for (int p = 0; p < pieces; ++p)
            for (std::size_t k = 0; k < gx.size(); ++k) {
                const double u = (p + gx[k]) / pieces;
                integral += gw[k] * f_closure_magnitude(alpha, beta, r * u * u) * 2.0 * r * u / pieces;
            }
        const double phi = flux_potential(alpha, beta, r);
        worst = std::max(worst, std::abs(phi - integral) / std::max(std::abs(integral), 1e-300));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Simplex meshes for the primal oracle.

/// 1D or 2D simplicial mesh with Dirichlet node flags.
struct SimplexMesh {
    int dim = 2;
    std::vector<Vec2> nodes;
    /// dim + 1 node indices per simplex (unused slots -1).
    std::vector<std::array<int, 3>> simplices;
    std::vector<bool> dirichlet;
    std::vector<double> volumes;
    /// Gradients of the barycentric functions per simplex.
    std::vector<std::array<Vec2, 3>> gradients;

    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t num_simplices() const { return simplices.size(); }
    int vertices_per_simplex() const { return dim + 1; }

    void finalize()
    {
        volumes.resize(simplices.size());
        gradients.resize(simplices.size());
        for (std::size_t t = 0; t < simplices.size(); ++t) {
            const auto& s = simplices[t];
            if (dim == 1) {
                const double h = nodes[s[1]][0] - nodes[s[0]][0];
                detail::require(h > 0.0, "SimplexMesh: nodes must increase");
                volumes[t] = h;
                gradients[t] = {Vec2{-1.0 / h, 0.0}, Vec2{1.0 / h, 0.0}, Vec2{0.0, 0.0}};
            } else {
                const Vec2 &a = nodes[s[0]], &b = nodes[s[1]], &c = nodes[s[2]];
                const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                detail::require(det > 0.0, "SimplexMesh: triangles must be positively oriented");
                volumes[t] = 0.5 * det;
                gradients[t] = {Vec2{(b[1] - c[1]) / det, (c[0] - b[0]) / det},
                                Vec2{(c[1] - a[1]) / det, (a[0] - c[0]) / det},
                                Vec2{(a[1] - b[1]) / det, (b[0] - a[0]) / det}};
            }
        }
    }
};

/// Each quad split into (bl, br, tr) and (bl, tr, tl); simplex 2c and 2c+1 belong to cell c.
inline SimplexMesh triangulate(const MeshPtr& mesh_ptr)
{
    const Mesh& mesh = *mesh_ptr;
    SimplexMesh s;
    s.dim = 2;
    s.nodes = mesh.vertices;
    s.dirichlet.assign(mesh.num_vertices(), false);
    for (int e : mesh.boundary_edges)
        for (int v : mesh.edges[e].vertices)
            s.dirichlet[v] = true;
    for (const auto& cell : mesh.cells) {
        const auto& v = cell.vertices;
        s.simplices.push_back({v[0], v[1], v[2]});
        s.simplices.push_back({v[0], v[2], v[3]});
    }
    s.finalize();
    return s;
}

/// Interval mesh through the given increasing nodes; both ends Dirichlet.
inline SimplexMesh interval_mesh(const std::vector<double>& x)
{
    detail::require(x.size() >= 2, "interval_mesh: need at least two nodes");
    SimplexMesh s;
    s.dim = 1;
    for (double v : x)
        s.nodes.push_back({v, 0.0});
    s.dirichlet.assign(x.size(), false);
    s.dirichlet.front() = s.dirichlet.back() = true;
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        s.simplices.push_back({static_cast<int>(i), static_cast<int>(i + 1), -1});
    s.finalize();
    return s;
}

/// Primal problem on a simplex mesh with zero Dirichlet data:
///   minimize  sum_T |T| Phi_T(|grad S|) + time term - int f S.
struct PrimalProblem {
    /// Per simplex.
    std::vector<double> alpha, beta, source;
    /// Semi-discrete term (lumped): 1/dt, and per node phi*gamma^k, phi*gamma^{k-1}*rho-term(S^{k-1}).
    double time_weight = 0.0;
    std::vector<double> phi_gamma;
    std::vector<double> prev_density;
    double smoothing_delta = 1e-12;
};

class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PrimalResult {
    std::vector<double> nodal;
    int iterations = 0;
    double gradient_norm = 0.0;
    double energy = 0.0;
};

namespace detail {

struct PrimalEvaluator {
    const SimplexMesh& mesh;
    const PrimalProblem& prob;
    std::vector<double> lumped;

    PrimalEvaluator(const SimplexMesh& m, const PrimalProblem& p) : mesh(m), prob(p)
    {
        lumped.assign(m.num_nodes(), 0.0);
        const int nv = m.vertices_per_simplex();
        for (std::size_t t = 0; t < m.num_simplices(); ++t)
            for (int i = 0; i < nv; ++i)
                lumped[m.simplices[t][i]] += m.volumes[t] / nv;
    }

    Vec2 grad(std::size_t t, const Vector& S) const
    {
        Vec2 g{0, 0};
        for (int i = 0; i < mesh.vertices_per_simplex(); ++i) {
            const double v = S[mesh.simplices[t][i]];
            g[0] += v * mesh.gradients[t][i][0];
            g[1] += v * mesh.gradients[t][i][1];
        }
        return g;
    }

    double energy(const Vector& S) const
    {
        double J = 0.0;
        const int nv = mesh.vertices_per_simplex();
        for (std::size_t t = 0; t < mesh.num_simplices(); ++t) {
            J += mesh.volumes[t] * flux_potential(prob.alpha[t], prob.beta[t], norm(grad(t, S)));
            for (int i = 0; i < nv; ++i)
                J -= prob.source[t] * mesh.volumes[t] / nv * S[mesh.simplices[t][i]];
        }
        if (prob.time_weight > 0.0)
            for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
                J += lumped[i] * prob.time_weight *
                     (prob.phi_gamma[i] * (2.0 / 3.0) * std::pow(std::abs(S[i]), 1.5) -
                      prob.prev_density[i] * S[i]);
        return J;
    }

    /// Gradient and Hessian of the energy over all nodes.
    void derivatives(const Vector& S, Vector& g, SparseMatrix& H) const
    {
        const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
        g = Vector::Zero(n);
        std::vector<Eigen::Triplet<double>> trip;
        const int nv = mesh.vertices_per_simplex();
        for (std::size_t t = 0; t < mesh.num_simplices(); ++t) {
            const Vec2 gr = grad(t, S);
            const double r = norm(gr);
            const double al = prob.alpha[t], be = prob.beta[t];
            const double q = std::sqrt(al * al + 4.0 * be * r);
            const double s = 2.0 / (al + q);
            const double c = r > 0.0 ? (1.0 / q - s) / (r * r) : 0.0;
            const double K[2][2] = {{s + c * gr[0] * gr[0], c * gr[0] * gr[1]},
                                    {c * gr[1] * gr[0], s + c * gr[1] * gr[1]}};
            const double vol = mesh.volumes[t];
            const auto& sx = mesh.simplices[t];
            const auto& G = mesh.gradients[t];
            for (int i = 0; i < nv; ++i) {
                g[sx[i]] += vol * s * dot(gr, G[i]) - prob.source[t] * vol / nv;
                for (int j = 0; j < nv; ++j) {
                    const double kij = G[i][0] * (K[0][0] * G[j][0] + K[0][1] * G[j][1]) +
                                       G[i][1] * (K[1][0] * G[j][0] + K[1][1] * G[j][1]);
                    trip.emplace_back(sx[i], sx[j], vol * kij);
                }
            }
        }
        if (prob.time_weight > 0.0)
            for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
                const double w = lumped[i] * prob.time_weight;
                g[i] += w * (prob.phi_gamma[i] * signed_sqrt(S[i]) - prob.prev_density[i]);
                trip.emplace_back(static_cast<int>(i), static_cast<int>(i),
                                  w * prob.phi_gamma[i] *
                                      signed_sqrt_slope(S[i], prob.smoothing_delta));
            }
        H.resize(n, n);
        H.setFromTriplets(trip.begin(), trip.end());
    }
};

} // namespace detail

/// Minimizes the primal energy over P1 fields vanishing on Dirichlet nodes. Descent
/// directions are Newton steps (positive definite Hessian), globalized by Armijo
/// backtracking on the energy; stops when max |gradient| over free nodes <= tol.
inline PrimalResult primal_oracle(const PrimalProblem& prob, const SimplexMesh& mesh, double tol,
                                  int max_iter = 200)
{
    const std::size_t nt = mesh.num_simplices();
    detail::require(prob.alpha.size() == nt && prob.beta.size() == nt && prob.source.size() == nt,
                    "primal_oracle: coefficient and source arrays need one entry per simplex");
    if (prob.time_weight > 0.0)
        detail::require(prob.phi_gamma.size() == mesh.num_nodes() &&
                            prob.prev_density.size() == mesh.num_nodes(),
                        "primal_oracle: time term needs nodal phi*gamma and previous density");
    detail::require(tol > 0.0, "primal_oracle: tol must be positive");

    detail::PrimalEvaluator ev(mesh, prob);
    std::vector<int> free_index(mesh.num_nodes(), -1);
    std::vector<int> free_nodes;
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
        if (!mesh.dirichlet[i]) {
            free_index[i] = static_cast<int>(free_nodes.size());
            free_nodes.push_back(static_cast<int>(i));
        }
    const auto nf = static_cast<Eigen::Index>(free_nodes.size());

    Vector S = Vector::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
    PrimalResult res;
    double J = ev.energy(S);
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    double best = std::numeric_limits<double>::infinity();
    int stalled = 0;
    for (;;) {
        Vector g;
        SparseMatrix H;
        ev.derivatives(S, g, H);
        Vector gf(nf);
        for (Eigen::Index k = 0; k < nf; ++k)
            gf[k] = g[free_nodes[k]];
        res.gradient_norm = nf > 0 ? gf.cwiseAbs().maxCoeff() : 0.0;
        if (res.gradient_norm <= tol)
            break;
        // Round-off floor: no 10% gradient reduction over several steps.
        if (res.gradient_norm < 0.9 * best) {
            best = res.gradient_norm;
            stalled = 0;
        } else if (++stalled >= 5) {
            if (res.gradient_norm <= 1e3 * tol)
                break;
            throw OracleError("primal_oracle: descent stalled at gradient " +
                              std::to_string(res.gradient_norm));
        }
        if (res.iterations >= max_iter)
            throw OracleError("primal_oracle: iteration limit reached");
        ++res.iterations;

        std::vector<Eigen::Triplet<double>> trip;
        for (int k = 0; k < H.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(H, k); it; ++it) {
                const int a = free_index[it.row()], b = free_index[it.col()];
                if (a >= 0 && b >= 0)
                    trip.emplace_back(a, b, it.value());
            }
        SparseMatrix Hf(nf, nf);
        Hf.setFromTriplets(trip.begin(), trip.end());
        ldlt.compute(Hf);
        Vector d = ldlt.info() == Eigen::Success ? Vector(ldlt.solve(-gf)) : Vector(-gf);
        if (!d.allFinite() || gf.dot(d) >= 0.0)
            d = -gf;

        const double slope = gf.dot(d);
        bool accepted = false;
        for (double t = 1.0; t > 1e-12; t *= 0.5) {
            Vector St = S;
            for (Eigen::Index k = 0; k < nf; ++k)
                St[free_nodes[k]] += t * d[k];
            const double Jt = ev.energy(St);
            if (Jt <= J + 1e-4 * t * slope) {
                S = St;
                J = Jt;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Energy decrease below round-off: accept a converged state if the gradient is small.
            if (res.gradient_norm <= 1e3 * tol)
                break;
            throw OracleError("primal_oracle: descent stalled at gradient " +
                              std::to_string(res.gradient_norm));
        }
    }
    res.nodal.assign(S.data(), S.data() + S.size());
    res.energy = J;
    return res;
}

/// Quad cell averages of a P1 field on triangulate(mesh).
inline ScalarField primal_cell_averages(const MeshPtr& mesh, const std::vector<double>& nodal)
{
    std::vector<double> out(mesh->num_cells());
    for (std::size_t c = 0; c < mesh->num_cells(); ++c) {
        const auto& v = mesh->cells[c].vertices;
        out[c] = (2.0 * nodal[v[0]] + nodal[v[1]] + 2.0 * nodal[v[2]] + nodal[v[3]]) / 6.0;
    }
    return {mesh, std::move(out)};
}

/// Primal counterpart of a stationary homogeneous mixed system (cell data copied to both
/// triangles of each quad).
inline PrimalProblem primal_problem(const MixedSystem& sys)
{
    PrimalProblem p;
    for (std::size_t c = 0; c < sys.mesh->num_cells(); ++c)
        for (int k = 0; k < 2; ++k) {
            p.alpha.push_back(sys.coeffs.alpha[c]);
            p.beta.push_back(sys.coeffs.beta[c]);
            p.source.push_back(sys.source[c]);
        }
    return p;
}

// ---------------------------------------------------------------------------
// Discrete inf-sup constant.

struct InfSupEstimate {
    double theta_h = 0.0;
    double h = 0.0;
    /// Smallest-mode q direction (cell values) when theta_h is reported as 0.
    std::vector<double> deficient_direction;
};

/// sqrt of the smallest eigenvalue of M_Q^{-1/2} B M_V^{-1} B^T M_Q^{-1/2}, with M_V the
/// H(div) Gram matrix (corner-rule mass plus divergence term) and M_Q = diag(area).
inline InfSupEstimate estimate_inf_sup(const MeshPtr& mesh)
{
    mesh->validate();
    MixedSystem sys;
    sys.mesh = mesh;
    sys.coeffs = CoefficientField::constant(mesh, 1.0, 0.0);
    sys.boundary = BoundaryData(mesh);
    sys.source = ScalarField::zeros(mesh);
    const auto ne = static_cast<Eigen::Index>(mesh->num_edges());
    const auto nc = static_cast<Eigen::Index>(mesh->num_cells());
    const SparseMatrix J = linearize(sys, Vector::Zero(ne + nc)).jacobian;
    const Eigen::MatrixXd mass = Eigen::MatrixXd(J).topLeftCorner(ne, ne);
    const Eigen::MatrixXd B = Eigen::MatrixXd(divergence_matrix(*mesh));
    Eigen::VectorXd inv_area(nc), inv_sqrt_area(nc);
    for (Eigen::Index c = 0; c < nc; ++c) {
        inv_area[c] = 1.0 / mesh->cell_measures[c];
        inv_sqrt_area[c] = std::sqrt(inv_area[c]);
    }
    const Eigen::MatrixXd MV = mass + B.transpose() * inv_area.asDiagonal() * B;
    const Eigen::MatrixXd X = Eigen::LLT<Eigen::MatrixXd>(MV).solve(B.transpose());
    Eigen::MatrixXd S = inv_sqrt_area.asDiagonal() * (B * X) * inv_sqrt_area.asDiagonal();
    S = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const double lmin = es.eigenvalues()[0];
    const double lmax = es.eigenvalues()[nc - 1];
    InfSupEstimate out;
    out.h = mesh->h();
    if (!(lmin > 1e-13 * lmax)) {
        const Eigen::VectorXd v = es.eigenvectors().col(0);
        out.deficient_direction.assign(v.data(), v.data() + v.size());
        out.theta_h = 0.0;
    } else {
        out.theta_h = std::sqrt(lmin);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manufactured solutions.

namespace detail {

/// Fourth-order central difference of fn along axis `dir`.
template <class Fn>
double central_diff(const Fn& fn, const Vec2& x, int dir, double h)
{
    auto at = [&](double s) {
        Vec2 p = x;
        p[dir] += s;
        return fn(p);
    };
    return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
}

} // namespace detail

/// Stationary manufactured pair on a rectangle with constant coefficients:
///   m = -F(grad S_exact),  f = div m,  S_b = S_exact on the boundary.
struct ManufacturedCase {
    PointFunction S_exact;
    double alpha = 1.0;
    double beta = 1.0;
    Rectangle domain{};
    double fd_step = 1e-3;
    /// Reference-grid refinement for the source cell averages.
    int reference_refinement = 10;

    Vec2 grad_S(const Vec2& x) const
    {
        return {detail::central_diff(S_exact, x, 0, fd_step),
                detail::central_diff(S_exact, x, 1, fd_step)};
    }

    Vec2 flux(const Vec2& x) const
    {
        const Vec2 g = grad_S(x);
        return f_closure({alpha, beta, 1.0, 0.0}, {-g[0], -g[1]});
    }

    double source(const Vec2& x) const
    {
        auto mx = [this](const Vec2& p) { return flux(p)[0]; };
        auto my = [this](const Vec2& p) { return flux(p)[1]; };
        return detail::central_diff(mx, x, 0, fd_step) + detail::central_diff(my, x, 1, fd_step);
    }

    MixedSystem system(const MeshPtr& mesh) const
    {
        MixedSystem sys;
        sys.mesh = mesh;
        sys.coeffs = CoefficientField::constant(mesh, alpha, beta);
        sys.boundary = sample_boundary(mesh, S_exact);
        sys.source = cell_averages(mesh, [this](const Vec2& x) { return source(x); }, 2,
                                   reference_refinement);
        return sys;
    }

    ScalarField S_reference(const MeshPtr& mesh) const { return cell_averages(mesh, S_exact, 3, 2); }
    FluxField m_reference(const MeshPtr& mesh) const
    {
        return interpolate_flux(mesh, [this](const Vec2& x) { return flux(x); }, 3);
    }
};

inline ManufacturedCase sine_case(double alpha, double beta)
{
    ManufacturedCase c;
    c.S_exact = [](const Vec2& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); };
    c.alpha = alpha;
    c.beta = beta;
    return c;
}

struct StudyRow {
    int n = 0;
    double h = 0.0;
    std::size_t flux_dofs = 0;
    std::size_t cell_dofs = 0;
    double error_S = 0.0;  // ||S_h - avg S||_{3/2}
    double error_m = 0.0;  // ||m_h - I m||_{0,3}
    /// Order against the previous row (NaN on the first).
    double order_S = std::numeric_limits<double>::quiet_NaN();
    double order_m = std::numeric_limits<double>::quiet_NaN();
};

struct StudyResult {
    std::vector<StudyRow> rows;
    /// Least-squares slopes of log(error) against log(h).
    double order_S = std::numeric_limits<double>::quiet_NaN();
    double order_m = std::numeric_limits<double>::quiet_NaN();
};

class StudyError : public std::runtime_error {
public:
    StudyError(const std::string& what, StudyResult partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const StudyResult& partial() const noexcept { return partial_; }

private:
    StudyResult partial_;
};

/// Least-squares slope of log(y) against log(x); NaN when undefined.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    const auto n = static_cast<double>(lx.size());
    if (lx.size() < 2)
        return std::numeric_limits<double>::quiet_NaN();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double den = n * sxx - sx * sx;
    return den == 0.0 ? std::numeric_limits<double>::quiet_NaN() : (n * sxy - sx * sy) / den;
}

inline void finish_orders(StudyResult& res)
{
    std::vector<double> h, es, em;
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        auto& r = res.rows[i];
        if (i > 0) {
            const auto& p = res.rows[i - 1];
            r.order_S = std::log(p.error_S / r.error_S) / std::log(p.h / r.h);
            r.order_m = std::log(p.error_m / r.error_m) / std::log(p.h / r.h);
        }
        h.push_back(r.h);
        es.push_back(r.error_S);
        em.push_back(r.error_m);
    }
    res.order_S = loglog_slope(h, es);
    res.order_m = loglog_slope(h, em);
}

/// Stationary solves on n x n meshes of the case's domain (at least 3 meshes).
inline StudyResult convergence_study(const ManufacturedCase& mc, const std::vector<int>& meshes,
                                     const ContinuationSchedule& schedule, double tol)
{
    detail::require(meshes.size() >= 3, "convergence_study: at least 3 meshes required");
    detail::require(static_cast<bool>(mc.S_exact), "convergence_study: case has no exact solution");
    StudyResult res;
    for (int n : meshes) {
        auto mesh = build_structured_mesh(n, n, mc.domain);
        const MixedSystem sys = mc.system(mesh);
        MixedState st;
        try {
            st = solve_stationary(sys, schedule, tol).first;
        } catch (const std::exception& e) {
            finish_orders(res);
            throw StudyError("convergence_study: solve failed on " + std::to_string(n) + "x" +
                                 std::to_string(n) + ": " + e.what(),
                             res);
        }
        StudyRow row;
        row.n = n;
        row.h = mesh->h();
        row.flux_dofs = mesh->num_edges();
        row.cell_dofs = mesh->num_cells();
        row.error_S = lp_norm(st.second - mc.S_reference(mesh), 1.5);
        row.error_m = flux_lp_norm(st.first - mc.m_reference(mesh), 3.0);
        res.rows.push_back(row);
    }
    finish_orders(res);
    return res;
}

inline void write_study_csv(std::ostream& os, const StudyResult& res)
{
    os << "schema = 1\n";
    os << "n,h,flux_dofs,cell_dofs,error_S,error_m,order_S,order_m\n";
    os.precision(17);
    for (const auto& r : res.rows)
        os << r.n << ',' << r.h << ',' << r.flux_dofs << ',' << r.cell_dofs << ',' << r.error_S
           << ',' << r.error_m << ',' << r.order_S << ',' << r.order_m << '\n';
}

inline void write_study_summary(std::ostream& os, const StudyResult& res)
{
    os << "convergence study: " << res.rows.size() << " meshes\n";
    os.precision(4);
    for (const auto& r : res.rows)
        os << "  h = " << r.h << "  |S - S_h|_{3/2} = " << std::scientific << r.error_S
           << "  |m - m_h|_{0,3} = " << r.error_m << std::defaultfloat << '\n';
    os << "  observed order (least squares): S " << res.order_S << ", m " << res.order_m << '\n';
}

// ---------------------------------------------------------------------------
// Inequality sweeps.

struct SweepReport {
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    /// Worst relative slack (bigger side - smaller side) / (|lhs| + |rhs|); >= -1e-12 expected.
    double continuity = std::numeric_limits<double>::infinity();   // | |x|x - |y|y | <= (|x|+|y|)|x-y|
    double monotonicity = std::numeric_limits<double>::infinity(); // (|x|x - |y|y).(x-y) >= |x-y|^3 / 2
    double holder = std::numeric_limits<double>::infinity();       // ssqrt Hoelder bound
    double sqrt_mono = std::numeric_limits<double>::infinity();    // ssqrt monotonicity
    double operator_mono = std::numeric_limits<double>::infinity(); // discrete <Au-Av,u-v>
    /// Slacks at the built-in equality witnesses (should be ~0).
    double witness_monotonicity = 0.0;
    double witness_holder = 0.0;

    double worst() const
    {
        return std::min({continuity, monotonicity, holder, sqrt_mono, operator_mono});
    }
};

inline double relative_slack(double bigger, double smaller)
{
    const double scale = std::abs(bigger) + std::abs(smaller);
    return scale == 0.0 ? 0.0 : (bigger - smaller) / scale;
}

namespace detail {

inline Vec2 random_vector_in_disk(std::mt19937_64& rng, double radius)
{
    std::uniform_real_distribution<double> u(-radius, radius);
    for (;;) {
        const Vec2 v{u(rng), u(rng)};
        if (norm(v) <= radius)
            return v;
    }
}

} // namespace detail

/// Worst slack of <Au - Av, u - v> >= (beta_min/2) sum area |u_c - v_c|^3 over random pairs.
inline double operator_monotonicity_sweep(std::mt19937_64& rng, int pairs, int n = 4,
                                          double alpha = 1.0, double beta = 1.0)
{
    auto mesh = build_structured_mesh(n, n);
    MixedSystem sys;
    sys.mesh = mesh;
    sys.coeffs = CoefficientField::constant(mesh, alpha, beta);
    sys.boundary = BoundaryData(mesh);
    sys.source = ScalarField::zeros(mesh);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> scale(-3.0, 1.0);
    const auto ne = static_cast<Eigen::Index>(mesh->num_edges());
    double worst = std::numeric_limits<double>::infinity();
    for (int p = 0; p < pairs; ++p) {
        const double s = std::pow(10.0, scale(rng));
        Vector a(ne), b(ne);
        for (Eigen::Index e = 0; e < ne; ++e) {
            a[e] = s * u(rng);
            b[e] = s * u(rng);
        }
        const Vector d = a - b;
        const std::span<const double> as(a.data(), a.size()), bs(b.data(), b.size()),
            ds(d.data(), d.size());
        const double lhs = (apply_A(sys, as) - apply_A(sys, bs)).dot(d);
        double rhs = 0.0;
        for (std::size_t c = 0; c < mesh->num_cells(); ++c)
            rhs += mesh->cell_measures[c] * std::pow(norm(centroid_vector(mesh->cells[c], ds)), 3);
        rhs *= 0.5 * sys.coeffs.beta_bounds.lower;
        worst = std::min(worst, relative_slack(lhs, rhs));
    }
    return worst;
}

/// Seeded sweep over the four pointwise inequalities and the discrete operator inequality.
inline SweepReport inequality_sweep(std::uint64_t seed, std::size_t samples,
                                    int operator_pairs = -1)
{
    detail::require(samples >= 1, "inequality_sweep: samples must be >= 1");
    std::mt19937_64 rng(seed);
    SweepReport rep;
    rep.seed = seed;
    rep.samples = samples;
    std::uniform_real_distribution<double> scalar(-10.0, 10.0);
    auto vec_pair = [&](const Vec2& x, const Vec2& y) {
        const auto m = check_vector_monotonicity(x, y);
        const auto c = check_vector_continuity(x, y);
        rep.monotonicity = std::min(rep.monotonicity, relative_slack(m.lhs, m.rhs));
        rep.continuity = std::min(rep.continuity, relative_slack(c.rhs, c.lhs));
        return relative_slack(m.lhs, m.rhs);
    };
    auto scalar_pair = [&](double x, double y) {
        const auto r = check_sqrt_monotonicity(x, y);
        rep.holder = std::min(rep.holder, relative_slack(r.holder_rhs, r.holder_lhs));
        rep.sqrt_mono = std::min(rep.sqrt_mono, relative_slack(r.mono_rhs, r.mono_lhs));
        return relative_slack(r.holder_rhs, r.holder_lhs);
    };
    for (std::size_t i = 0; i < samples; ++i) {
        const Vec2 x = detail::random_vector_in_disk(rng, 10.0);
        const Vec2 y = detail::random_vector_in_disk(rng, 10.0);
        vec_pair(x, y);
        scalar_pair(scalar(rng), scalar(rng));
    }
    // Equality witnesses: antipodal vectors (cubic monotonicity), sign-flipped scalars (Hoelder).
    double wm = 0.0, wh = 0.0;
    for (double r : {1e-3, 0.5, 1.0, 7.0, 10.0}) {
        wm = std::max(wm, std::abs(vec_pair({r, 0.0}, {-r, 0.0})));
        wm = std::max(wm, std::abs(vec_pair({0.6 * r, -0.8 * r}, {-0.6 * r, 0.8 * r})));
        wh = std::max(wh, std::abs(scalar_pair(r, -r)));
    }
    rep.witness_monotonicity = wm;
    rep.witness_holder = wh;
    const int pairs = operator_pairs >= 0 ? operator_pairs
                                          : static_cast<int>(std::min<std::size_t>(samples, 200));
    if (pairs > 0)
        rep.operator_mono = operator_monotonicity_sweep(rng, pairs);
    return rep;
}

/// max |G(F(g)) - g| / (1 + |g|) over random (alpha, beta, g), plus |g| in {0, 1e-14, 1e6}.
inline double closure_roundtrip_sweep(std::uint64_t seed, std::size_t samples)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> logc(-2.0, 2.0), logg(-14.0, 6.0), ang(0.0, 2 * M_PI);
    double worst = 0.0;
    auto probe = [&](double alpha, double beta, const Vec2& g) {
        const ClosureParams p{alpha, beta, 1.0, 0.0};
        const Vec2 back = g_closure(p, f_closure(p, g));
        worst = std::max(worst, norm({back[0] - g[0], back[1] - g[1]}) / (1.0 + norm(g)));
    };
    for (std::size_t i = 0; i < samples; ++i) {
        const double a = std::pow(10.0, logc(rng)), b = std::pow(10.0, logc(rng));
        const double th = ang(rng);
        double mag;
        switch (i % 4) {
        case 0: mag = 0.0; break;
        case 1: mag = 1e-14; break;
        case 2: mag = 1e6; break;
        default: mag = std::pow(10.0, logg(rng)); break;
        }
        probe(a, b, {mag * std::cos(th), mag * std::sin(th)});
    }
    return worst;
}

} // namespace dfmix
