#pragma once

// Forms of the mixed Darcy-Forchheimer problem and their Newton linearization.
//
//   a(u, v)   = int (alpha + beta |u|) u.v           corner (trapezoidal) quadrature
//   b(v, q)   = int div(v) q                         exact
//   c(p, q)   = int w p/sqrt|p| q                    w = eps, or phi gamma^k / dt
//   d(u, v)   = eps int |div u| div u div v          exact
//   g(v)      = -int_{dOmega} S_b v.n
//   f~(q)     = int (f + phi gamma^{k-1}/dt rho-term(S^{k-1})) q
//
// The discrete equations are
//   a(m, v) + d(m, v) - b(v, S) = g(v)
//   c(S, q) + b(m, q)           = f~(q)
// with unknown vector [edge fluxes | cell values].

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dfmix/error.hpp"
#include "dfmix/grid.hpp"
#include "dfmix/kernel.hpp"

namespace dfmix {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

struct Bounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// Cellwise alpha, beta, gamma, phi with declared bounds.
struct CoefficientField {
    ScalarField alpha, beta, gamma, phi;
    Bounds alpha_bounds, beta_bounds, gamma_bounds, phi_bounds;

    static CoefficientField constant(const MeshPtr& mesh, double alpha, double beta,
                                     double gamma = 1.0, double phi = 1.0)
    {
        CoefficientField c{ScalarField::constant(mesh, alpha), ScalarField::constant(mesh, beta),
                           ScalarField::constant(mesh, gamma), ScalarField::constant(mesh, phi),
                           {alpha, alpha},
                           {beta, beta},
                           {gamma, gamma},
                           {phi, phi}};
        c.validate();
        return c;
    }

    /// Declared bounds become the min/max of the cell values.
    static CoefficientField from_fields(ScalarField alpha, ScalarField beta, ScalarField gamma,
                                        ScalarField phi)
    {
        auto range = [](const ScalarField& f) {
            const auto v = f.values();
            return Bounds{*std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())};
        };
        CoefficientField c{alpha, beta, gamma, phi, range(alpha), range(beta), range(gamma),
                           range(phi)};
        c.validate();
        return c;
    }

    const MeshPtr& mesh() const { return alpha.mesh(); }

    /// beta may vanish (linear Darcy limit); alpha, gamma, phi must be bounded away from 0.
    void validate() const
    {
        detail::require(alpha.mesh() && beta.mesh() == alpha.mesh() &&
                            gamma.mesh() == alpha.mesh() && phi.mesh() == alpha.mesh(),
                        "CoefficientField: coefficients must share one mesh");
        auto check = [](const ScalarField& f, const Bounds& b, bool strict, const char* name) {
            const std::string n(name);
            detail::require(strict ? b.lower > 0.0 : b.lower >= 0.0,
                            n + " lower bound must be " + (strict ? "positive" : "nonnegative"));
            detail::require(b.upper >= b.lower && std::isfinite(b.upper),
                            n + " upper bound must be finite and >= lower bound");
            for (double v : f.values())
                detail::require(v >= b.lower && v <= b.upper,
                                n + " cell value outside its declared bounds");
        };
        check(alpha, alpha_bounds, true, "alpha");
        check(beta, beta_bounds, false, "beta");
        check(gamma, gamma_bounds, true, "gamma");
        check(phi, phi_bounds, true, "phi");
    }

    ClosureParams at(std::size_t c, double delta = 0.0) const
    {
        return {alpha[c], beta[c], gamma[c], delta};
    }
};

/// One stationary or semi-discrete mixed problem.
///
/// `time_weight` is 1/dt; the semi-discrete weight phi*gamma/dt is formed cellwise.
/// time_weight == 0 selects the stationary problem.
struct MixedSystem {
    MeshPtr mesh;
    CoefficientField coeffs;
    BoundaryData boundary;
    ScalarField source;
    double eps = 0.0;
    double time_weight = 0.0;
    /// Semi-discrete only: S^{k-1} and gamma^{k-1} of the lagged density term.
    std::optional<ScalarField> prev_S;
    std::optional<ScalarField> prev_gamma;
    /// Jacobian smoothing radius; residuals never use it.
    double smoothing_delta = 1e-8;

    bool semi_discrete() const { return time_weight > 0.0; }

    void validate() const
    {
        detail::require(mesh != nullptr, "MixedSystem: null mesh");
        detail::require(coeffs.mesh() == mesh, "MixedSystem: coefficients on another mesh");
        detail::require(source.mesh() == mesh, "MixedSystem: source on another mesh");
        detail::require(boundary.mesh() == nullptr || boundary.mesh() == mesh,
                        "MixedSystem: boundary data on another mesh");
        detail::require(eps >= 0.0, "MixedSystem: eps must be nonnegative");
        detail::require(time_weight >= 0.0, "MixedSystem: time_weight must be nonnegative");
        detail::require(smoothing_delta >= 0.0, "MixedSystem: smoothing_delta must be >= 0");
        coeffs.validate();
        if (semi_discrete()) {
            detail::require(prev_S.has_value() && prev_gamma.has_value(),
                            "MixedSystem: semi-discrete mode needs S^{k-1} and gamma^{k-1}");
            detail::require(prev_S->mesh() == mesh && prev_gamma->mesh() == mesh,
                            "MixedSystem: lagged fields on another mesh");
        }
    }

    std::size_t num_fluxes() const { return mesh->num_edges(); }
    std::size_t num_cells() const { return mesh->num_cells(); }
    std::size_t size() const { return num_fluxes() + num_cells(); }
};

// ---------------------------------------------------------------------------
// State packing.

inline Vector pack_state(const FluxField& m, const ScalarField& S)
{
    Vector x(m.size() + S.size());
    for (std::size_t e = 0; e < m.size(); ++e)
        x[static_cast<Eigen::Index>(e)] = m[e];
    for (std::size_t c = 0; c < S.size(); ++c)
        x[static_cast<Eigen::Index>(m.size() + c)] = S[c];
    return x;
}

inline std::pair<FluxField, ScalarField> unpack_state(const MeshPtr& mesh, const Vector& x)
{
    const auto ne = mesh->num_edges();
    detail::require(static_cast<std::size_t>(x.size()) == ne + mesh->num_cells(),
                    "unpack_state: size mismatch");
    std::vector<double> m(x.data(), x.data() + ne);
    std::vector<double> s(x.data() + ne, x.data() + x.size());
    return {FluxField(mesh, std::move(m)), ScalarField(mesh, std::move(s))};
}

// ---------------------------------------------------------------------------
// Form evaluations.

namespace detail {

inline void require_on(const MixedSystem& sys, const MeshPtr& m, const char* where)
{
    if (m.get() != sys.mesh.get())
        throw ContractError(std::string(where) + ": field not on the system mesh");
}

inline double c_weight(const MixedSystem& sys, std::size_t c, bool eps_mode)
{
    if (eps_mode)
        return sys.eps;
    return sys.coeffs.phi[c] * sys.coeffs.gamma[c] * sys.time_weight;
}

} // namespace detail

inline double apply_a(const MixedSystem& sys, const FluxField& u, const FluxField& v)
{
    detail::require_on(sys, u.mesh(), "apply_a");
    detail::require_on(sys, v.mesh(), "apply_a");
    const Mesh& mesh = *sys.mesh;
    double total = 0.0;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        const auto uc = corner_vectors(mesh.cells[c], u.fluxes());
        const auto vc = corner_vectors(mesh.cells[c], v.fluxes());
        const double w = 0.25 * mesh.cell_measures[c];
        const double al = sys.coeffs.alpha[c], be = sys.coeffs.beta[c];
        for (int q = 0; q < 4; ++q)
            total += w * (al + be * norm(uc[q])) * dot(uc[q], vc[q]);
    }
    return total;
}

inline double apply_b(const FluxField& v, const ScalarField& q)
{
    detail::require_same_mesh(v.mesh(), q.mesh(), "apply_b");
    const Mesh& mesh = *v.mesh();
    double total = 0.0;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c)
        total += cell_flux_sum(mesh.cells[c], v.fluxes()) * q[c];
    return total;
}

inline double apply_c(const MixedSystem& sys, const ScalarField& p, const ScalarField& q,
                      bool eps_mode)
{
    detail::require_on(sys, p.mesh(), "apply_c");
    detail::require_on(sys, q.mesh(), "apply_c");
    if (eps_mode ? sys.eps == 0.0 : sys.time_weight == 0.0)
        throw ContractError("apply_c: selected weight is zero, the form vanishes identically");
    const Mesh& mesh = *sys.mesh;
    double total = 0.0;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c)
        total += mesh.cell_measures[c] * detail::c_weight(sys, c, eps_mode) *
                 signed_sqrt(p[c]) * q[c];
    return total;
}

inline double apply_d(const MixedSystem& sys, const FluxField& u, const FluxField& v)
{
    detail::require_on(sys, u.mesh(), "apply_d");
    detail::require_on(sys, v.mesh(), "apply_d");
    if (sys.eps == 0.0)
        return 0.0;
    const Mesh& mesh = *sys.mesh;
    double total = 0.0;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        const double area = mesh.cell_measures[c];
        const double du = cell_flux_sum(mesh.cells[c], u.fluxes()) / area;
        const double dv = cell_flux_sum(mesh.cells[c], v.fluxes()) / area;
        total += area * std::abs(du) * du * dv;
    }
    return sys.eps * total;
}

inline double rhs_g(const MixedSystem& sys, const FluxField& v)
{
    detail::require_on(sys, v.mesh(), "rhs_g");
    const Mesh& mesh = *sys.mesh;
    double total = 0.0;
    for (std::size_t k = 0; k < mesh.boundary_edges.size(); ++k)
        total -= sys.boundary.at_slot(static_cast<int>(k)) * v[mesh.boundary_edges[k]];
    return total;
}

/// Source functional, plus the lagged density term when both previous fields are given.
inline double rhs_f_tilde(const MixedSystem& sys, const ScalarField& q,
                          const std::optional<ScalarField>& prev_S = std::nullopt,
                          const std::optional<ScalarField>& prev_gamma = std::nullopt)
{
    detail::require_on(sys, q.mesh(), "rhs_f_tilde");
    if (sys.semi_discrete() && !prev_S)
        throw ContractError("rhs_f_tilde: semi-discrete mode requires S^{k-1}");
    const bool lagged = prev_S.has_value();
    if (lagged)
        detail::require(prev_gamma.has_value() && sys.time_weight > 0.0,
                        "rhs_f_tilde: lagged term needs gamma^{k-1} and a positive time weight");
    const Mesh& mesh = *sys.mesh;
    double total = 0.0;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        double integrand = sys.source[c];
        if (lagged)
            integrand += sys.coeffs.phi[c] * (*prev_gamma)[c] * sys.time_weight *
                         signed_sqrt((*prev_S)[c]);
        total += mesh.cell_measures[c] * integrand * q[c];
    }
    return total;
}

// ---------------------------------------------------------------------------
// Assembled operators.

/// B with B(c, e) = +-1: b(v, q) = q^T B v.
inline SparseMatrix divergence_matrix(const Mesh& mesh)
{
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(4 * mesh.num_cells());
    for (std::size_t c = 0; c < mesh.num_cells(); ++c)
        for (int i = 0; i < 4; ++i)
            t.emplace_back(static_cast<int>(c), mesh.cells[c].edges[i], mesh.cells[c].signs[i]);
    SparseMatrix B(static_cast<Eigen::Index>(mesh.num_cells()),
                   static_cast<Eigen::Index>(mesh.num_edges()));
    B.setFromTriplets(t.begin(), t.end());
    return B;
}

/// Vector of a(u, psi_e) over all flux basis functions psi_e.
inline Vector apply_A(const MixedSystem& sys, std::span<const double> fluxes)
{
    const Mesh& mesh = *sys.mesh;
    Vector out = Vector::Zero(static_cast<Eigen::Index>(mesh.num_edges()));
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        const Cell& cell = mesh.cells[c];
        const auto W = corner_weights(cell);
        const auto u = corner_vectors(cell, fluxes);
        const double w = 0.25 * mesh.cell_measures[c];
        for (int q = 0; q < 4; ++q) {
            const double k = sys.coeffs.alpha[c] + sys.coeffs.beta[c] * norm(u[q]);
            for (int i = 0; i < 4; ++i)
                out[cell.edges[i]] += cell.signs[i] * w * k * dot(u[q], W[q][i]);
        }
    }
    return out;
}

/// Vector of g(psi_e).
inline Vector boundary_vector(const MixedSystem& sys)
{
    const Mesh& mesh = *sys.mesh;
    Vector g = Vector::Zero(static_cast<Eigen::Index>(mesh.num_edges()));
    for (std::size_t k = 0; k < mesh.boundary_edges.size(); ++k)
        g[mesh.boundary_edges[k]] = -sys.boundary.at_slot(static_cast<int>(k));
    return g;
}

/// Vector of f~(chi_c) over cell indicators.
inline Vector source_vector(const MixedSystem& sys)
{
    const Mesh& mesh = *sys.mesh;
    Vector f(static_cast<Eigen::Index>(mesh.num_cells()));
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        double integrand = sys.source[c];
        if (sys.semi_discrete())
            integrand += sys.coeffs.phi[c] * (*sys.prev_gamma)[c] * sys.time_weight *
                         signed_sqrt((*sys.prev_S)[c]);
        f[static_cast<Eigen::Index>(c)] = mesh.cell_measures[c] * integrand;
    }
    return f;
}

/// Which regularizing terms enter the equations.
struct FormSelection {
    bool d_eps = false;
    bool c_eps = false;
    bool c_time = false;

    static FormSelection of(const MixedSystem& sys)
    {
        return {sys.eps > 0.0, sys.eps > 0.0 && !sys.semi_discrete(), sys.semi_discrete()};
    }
};

namespace detail {

inline double c_cell_weight(const MixedSystem& sys, const FormSelection& sel, std::size_t c)
{
    double w = 0.0;
    if (sel.c_eps)
        w += sys.eps;
    if (sel.c_time)
        w += sys.coeffs.phi[c] * sys.coeffs.gamma[c] * sys.time_weight;
    return w;
}

} // namespace detail

/// Residual of the mixed equations at x = [m | S], exact closures.
inline Vector residual(const MixedSystem& sys, const Vector& x)
{
    const Mesh& mesh = *sys.mesh;
    const auto ne = static_cast<Eigen::Index>(mesh.num_edges());
    detail::require(static_cast<std::size_t>(x.size()) == sys.size(), "residual: size mismatch");
    const FormSelection sel = FormSelection::of(sys);
    std::span<const double> m(x.data(), static_cast<std::size_t>(ne));

    Vector r(x.size());
    r.head(ne) = apply_A(sys, m) - boundary_vector(sys);
    r.tail(x.size() - ne) = -source_vector(sys);
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        const Cell& cell = mesh.cells[c];
        const double area = mesh.cell_measures[c];
        const double S = x[ne + static_cast<Eigen::Index>(c)];
        const double flux_sum = cell_flux_sum(cell, m);
        const double div = flux_sum / area;
        for (int i = 0; i < 4; ++i) {
            double contrib = -cell.signs[i] * S;
            if (sel.d_eps)
                contrib += sys.eps * std::abs(div) * div * cell.signs[i];
            r[cell.edges[i]] += contrib;
        }
        double rs = flux_sum;
        const double w = detail::c_cell_weight(sys, sel, c);
        if (w != 0.0)
            rs += area * w * signed_sqrt(S);
        r[ne + static_cast<Eigen::Index>(c)] += rs;
    }
    return r;
}

inline Vector residual(const MixedSystem& sys, const FluxField& m, const ScalarField& S)
{
    return residual(sys, pack_state(m, S));
}

/// Scaled Euclidean residual norm ||r|| / sqrt(n).
inline double residual_norm(const Vector& r)
{
    return r.size() == 0 ? 0.0 : r.norm() / std::sqrt(static_cast<double>(r.size()));
}

struct LinearizedSystem {
    /// [A'(m) + D'(m), -B^T; B, C'(S)]
    SparseMatrix jacobian;
    Vector residual;
};

enum class Linearization {
    newton,
    /// Lagged coefficients: (alpha + beta |m|) I, eps |div m|, w / sqrt|S|.
    picard,
};

/// Newton (or Picard) linearization; the matrix uses smoothed magnitudes, the residual
/// exact ones. In both modes J x reproduces the nonlinear forms at the linearization
/// point up to the smoothing.
inline LinearizedSystem linearize(const MixedSystem& sys, const Vector& x,
                                  Linearization kind = Linearization::newton)
{
    const bool picard = kind == Linearization::picard;
    const Mesh& mesh = *sys.mesh;
    const auto ne = static_cast<int>(mesh.num_edges());
    detail::require(static_cast<std::size_t>(x.size()) == sys.size(), "linearize: size mismatch");
    const FormSelection sel = FormSelection::of(sys);
    const double delta = sys.smoothing_delta;
    std::span<const double> m(x.data(), static_cast<std::size_t>(ne));

    std::vector<Eigen::Triplet<double>> t;
    t.reserve(mesh.num_cells() * (16 + 16 + 8 + 1));
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        const Cell& cell = mesh.cells[c];
        const double area = mesh.cell_measures[c];
        const auto W = corner_weights(cell);
        const auto u = corner_vectors(cell, m);
        const ClosureParams cp = sys.coeffs.at(c, delta);
        // Derivatives with respect to outward fluxes; signs are applied on scatter.
        double block[4][4] = {};
        for (int q = 0; q < 4; ++q) {
            auto K = g_closure_jacobian(cp, u[q]);
            if (picard) {
                const double d = delta;
                const double k = cp.alpha + cp.beta * std::sqrt(dot(u[q], u[q]) + d * d);
                K = {k, 0.0, 0.0, k};
            }
            for (int i = 0; i < 4; ++i) {
                const Vec2 Kw{K[0] * W[q][i][0] + K[1] * W[q][i][1],
                              K[2] * W[q][i][0] + K[3] * W[q][i][1]};
                for (int j = 0; j < 4; ++j)
                    block[j][i] += 0.25 * area * dot(W[q][j], Kw);
            }
        }
        if (sel.d_eps) {
            const double div = cell_flux_sum(cell, m) / area;
            const double dd = sys.eps * (picard ? 1.0 : 2.0) * std::abs(div) / area;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    block[i][j] += dd;
        }
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (block[i][j] != 0.0)
                    t.emplace_back(cell.edges[i], cell.edges[j],
                                   cell.signs[i] * cell.signs[j] * block[i][j]);
        const int row = ne + static_cast<int>(c);
        for (int i = 0; i < 4; ++i) {
            t.emplace_back(cell.edges[i], row, -cell.signs[i]);
            t.emplace_back(row, cell.edges[i], cell.signs[i]);
        }
        const double w = detail::c_cell_weight(sys, sel, c);
        if (w != 0.0) {
            const double slope = picard ? 1.0 / std::sqrt(std::sqrt(x[row] * x[row] + delta * delta))
                                        : signed_sqrt_slope(x[row], delta);
            t.emplace_back(row, row, area * w * slope);
        }
    }
    LinearizedSystem out;
    out.jacobian.resize(x.size(), x.size());
    out.jacobian.setFromTriplets(t.begin(), t.end());
    out.residual = residual(sys, x);
    return out;
}

/// Direct sparse LU of an unsymmetric system; reuses the symbolic analysis.
class SparseDirectSolver {
public:
    Vector solve(const SparseMatrix& A, const Vector& b)
    {
        if (!analyzed_ || A.rows() != rows_ || A.nonZeros() != nnz_) {
            lu_.analyzePattern(A);
            analyzed_ = true;
            rows_ = A.rows();
            nnz_ = A.nonZeros();
        }
        lu_.factorize(A);
        if (lu_.info() != Eigen::Success)
            throw ConditioningError("sparse LU failed: " + lu_.lastErrorMessage(),
                                    trailing_index(lu_.lastErrorMessage()));
        Vector x = lu_.solve(b);
        if (lu_.info() != Eigen::Success || !x.allFinite())
            throw ConditioningError("sparse LU solve produced non-finite values");
        return x;
    }

private:
    static long trailing_index(const std::string& msg)
    {
        const auto pos = msg.find_last_not_of("0123456789");
        if (pos == std::string::npos || pos + 1 >= msg.size())
            return -1;
        return std::stol(msg.substr(pos + 1));
    }

    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
    bool analyzed_ = false;
    Eigen::Index rows_ = 0;
    Eigen::Index nnz_ = 0;
};

/// MatrixMarket coordinate (general, real) export.
inline void write_matrix_market(std::ostream& os, const SparseMatrix& A)
{
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
    os.precision(17);
    for (int k = 0; k < A.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(A, k); it; ++it)
            os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

inline void write_matrix_market(std::ostream& os, const Vector& v)
{
    os << "%%MatrixMarket matrix array real general\n";
    os << v.size() << " 1\n";
    os.precision(17);
    for (Eigen::Index i = 0; i < v.size(); ++i)
        os << v[i] << '\n';
}

} // namespace dfmix
