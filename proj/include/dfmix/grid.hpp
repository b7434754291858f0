#pragma once

// Structured quadrilateral meshes and the lowest-order edge-flux / cellwise-constant
// discrete spaces.
//
// A flux dof is the total normal flux through an edge, measured along the edge's
// stored normal. Interior edges carry +x / +y normals, boundary edges carry outward
// normals. Inside a cell the flux is the lowest-order Raviart-Thomas field: the x
// component is affine in x, the y component affine in y.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dfmix/error.hpp"
#include "dfmix/kernel.hpp"

namespace dfmix {

struct Rectangle {
    double x0 = 0.0;
    double x1 = 1.0;
    double y0 = 0.0;
    double y1 = 1.0;

    double area() const { return (x1 - x0) * (y1 - y0); }
};

enum class BoundarySide : int { interior = -1, bottom = 0, right = 1, top = 2, left = 3 };

struct Edge {
    std::array<int, 2> vertices{};
    Vec2 normal{};
    Vec2 midpoint{};
    double length = 0.0;
    /// cells[0]: the cell the normal points out of; cells[1]: the cell it points into
    /// (-1 for boundary edges).
    std::array<int, 2> cells{-1, -1};
    BoundarySide side = BoundarySide::interior;

    bool on_boundary() const { return side != BoundarySide::interior; }
};

/// Local edge slots: 0 bottom, 1 right, 2 top, 3 left.
/// Local vertex / corner slots: 0 bottom-left, 1 bottom-right, 2 top-right, 3 top-left.
struct Cell {
    std::array<int, 4> vertices{};
    std::array<int, 4> edges{};
    /// +1 when the edge normal is outward for this cell, -1 otherwise.
    std::array<int, 4> signs{};
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    Vec2 centroid() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
};

class Mesh {
public:
    std::vector<Vec2> vertices;
    std::vector<Cell> cells;
    std::vector<Edge> edges;
    std::vector<int> boundary_edges;
    std::vector<double> cell_measures;
    std::vector<double> edge_lengths;
    Rectangle domain;
    int nx = 0;
    int ny = 0;

    std::size_t num_cells() const { return cells.size(); }
    std::size_t num_edges() const { return edges.size(); }
    std::size_t num_vertices() const { return vertices.size(); }

    double h() const
    {
        return std::max((domain.x1 - domain.x0) / nx, (domain.y1 - domain.y0) / ny);
    }

    /// Index of the boundary edge within `boundary_edges`, or -1.
    int boundary_slot(int edge) const
    {
        const auto it = std::lower_bound(boundary_edges.begin(), boundary_edges.end(), edge);
        if (it == boundary_edges.end() || *it != edge)
            return -1;
        return static_cast<int>(it - boundary_edges.begin());
    }

    /// Throws ContractError when a structural invariant fails.
    void validate() const
    {
        std::vector<int> incidence(edges.size(), 0);
        double total = 0.0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const Cell& cell = cells[c];
            detail::require(cell.area() > 0.0, "Mesh: cell with nonpositive measure");
            total += cell.area();
            for (int i = 0; i < 4; ++i) {
                const int e = cell.edges[i];
                ++incidence[e];
                const int expected = cell.signs[i] > 0 ? 0 : 1;
                detail::require(edges[e].cells[expected] == static_cast<int>(c),
                                "Mesh: edge/cell adjacency inconsistent");
            }
        }
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const int want = edges[e].on_boundary() ? 1 : 2;
            detail::require(incidence[e] == want, "Mesh: edge shared by wrong number of cells");
            detail::require(edges[e].length > 0.0, "Mesh: degenerate edge");
        }
        detail::require(std::abs(total - domain.area()) <= 1e-12 * domain.area(),
                        "Mesh: cell measures do not sum to the domain measure");
    }
};

using MeshPtr = std::shared_ptr<const Mesh>;

/// Conforming nx-by-ny quadrilateral mesh of an axis-aligned rectangle.
inline MeshPtr build_structured_mesh(int nx, int ny, const Rectangle& domain = {})
{
    detail::require(nx >= 1 && ny >= 1, "build_structured_mesh: cell counts must be >= 1");
    detail::require(domain.x1 > domain.x0 && domain.y1 > domain.y0,
                    "build_structured_mesh: degenerate rectangle");

    auto mesh = std::make_shared<Mesh>();
    mesh->domain = domain;
    mesh->nx = nx;
    mesh->ny = ny;
    const double hx = (domain.x1 - domain.x0) / nx;
    const double hy = (domain.y1 - domain.y0) / ny;
    auto xcoord = [&](int i) { return i == nx ? domain.x1 : domain.x0 + i * hx; };
    auto ycoord = [&](int j) { return j == ny ? domain.y1 : domain.y0 + j * hy; };

    auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            mesh->vertices.push_back({xcoord(i), ycoord(j)});

    // Horizontal edges first (row j spans cells below/above), then vertical edges.
    const int n_horizontal = nx * (ny + 1);
    auto hid = [&](int i, int j) { return j * nx + i; };
    auto vert_id = [&](int i, int j) { return n_horizontal + j * (nx + 1) + i; };

    mesh->edges.resize(static_cast<std::size_t>(n_horizontal + (nx + 1) * ny));
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            Edge& e = mesh->edges[hid(i, j)];
            const double xa = xcoord(i), xb = xcoord(i + 1), y = ycoord(j);
            e.length = xb - xa;
            e.midpoint = {0.5 * (xa + xb), y};
            const int below = j > 0 ? (j - 1) * nx + i : -1;
            const int above = j < ny ? j * nx + i : -1;
            if (j == 0) {
                e.normal = {0.0, -1.0};
                e.side = BoundarySide::bottom;
                e.cells = {above, -1};
            } else {
                e.normal = {0.0, 1.0};
                e.side = j == ny ? BoundarySide::top : BoundarySide::interior;
                e.cells = {below, above};
            }
            // Tangent t with normal = (t_y, -t_x).
            if (e.normal[1] > 0)
                e.vertices = {vid(i + 1, j), vid(i, j)};
            else
                e.vertices = {vid(i, j), vid(i + 1, j)};
        }
    }
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            Edge& e = mesh->edges[vert_id(i, j)];
            const double ya = ycoord(j), yb = ycoord(j + 1), x = xcoord(i);
            e.length = yb - ya;
            e.midpoint = {x, 0.5 * (ya + yb)};
            const int left = i > 0 ? j * nx + i - 1 : -1;
            const int right = i < nx ? j * nx + i : -1;
            if (i == 0) {
                e.normal = {-1.0, 0.0};
                e.side = BoundarySide::left;
                e.cells = {right, -1};
            } else {
                e.normal = {1.0, 0.0};
                e.side = i == nx ? BoundarySide::right : BoundarySide::interior;
                e.cells = {left, right};
            }
            if (e.normal[0] > 0)
                e.vertices = {vid(i, j), vid(i, j + 1)};
            else
                e.vertices = {vid(i, j + 1), vid(i, j)};
        }
    }

    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            Cell c;
            c.vertices = {vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)};
            c.edges = {hid(i, j), vert_id(i + 1, j), hid(i, j + 1), vert_id(i, j)};
            c.x0 = xcoord(i);
            c.x1 = xcoord(i + 1);
            c.y0 = ycoord(j);
            c.y1 = ycoord(j + 1);
            const int self = j * nx + i;
            for (int k = 0; k < 4; ++k)
                c.signs[k] = mesh->edges[c.edges[k]].cells[0] == self ? 1 : -1;
            mesh->cells.push_back(c);
            mesh->cell_measures.push_back(c.area());
        }
    }
    for (std::size_t e = 0; e < mesh->edges.size(); ++e) {
        mesh->edge_lengths.push_back(mesh->edges[e].length);
        if (mesh->edges[e].on_boundary())
            mesh->boundary_edges.push_back(static_cast<int>(e));
    }
    mesh->validate();
    return mesh;
}

namespace detail {

inline void require_finite_values(std::span<const double> v, const char* what)
{
    for (double x : v)
        if (!std::isfinite(x))
            throw DomainError(std::string(what) + ": non-finite value");
}

inline void require_same_mesh(const MeshPtr& a, const MeshPtr& b, const char* where)
{
    if (a.get() != b.get())
        throw ContractError(std::string(where) + ": fields live on different meshes");
}

} // namespace detail

/// One value per cell (pressure-squared S, test functions, sources).
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(MeshPtr mesh, std::vector<double> values)
        : mesh_(std::move(mesh)), values_(std::move(values))
    {
        detail::require(mesh_ != nullptr, "ScalarField: null mesh");
        detail::require(values_.size() == mesh_->num_cells(),
                        "ScalarField: value count must equal cell count");
        detail::require_finite_values(values_, "ScalarField");
    }

    static ScalarField constant(MeshPtr mesh, double value)
    {
        const auto n = mesh->num_cells();
        return {std::move(mesh), std::vector<double>(n, value)};
    }
    static ScalarField zeros(MeshPtr mesh) { return constant(std::move(mesh), 0.0); }

    const MeshPtr& mesh() const { return mesh_; }
    std::span<const double> values() const { return values_; }
    std::vector<double>& data() { return values_; }
    double operator[](std::size_t c) const { return values_[c]; }
    std::size_t size() const { return values_.size(); }

private:
    MeshPtr mesh_;
    std::vector<double> values_;
};

/// One signed normal flux per edge.
class FluxField {
public:
    FluxField() = default;
    FluxField(MeshPtr mesh, std::vector<double> fluxes)
        : mesh_(std::move(mesh)), fluxes_(std::move(fluxes))
    {
        detail::require(mesh_ != nullptr, "FluxField: null mesh");
        detail::require(fluxes_.size() == mesh_->num_edges(),
                        "FluxField: flux count must equal edge count");
        detail::require_finite_values(fluxes_, "FluxField");
    }

    static FluxField zeros(MeshPtr mesh)
    {
        const auto n = mesh->num_edges();
        return {std::move(mesh), std::vector<double>(n, 0.0)};
    }

    const MeshPtr& mesh() const { return mesh_; }
    std::span<const double> fluxes() const { return fluxes_; }
    std::vector<double>& data() { return fluxes_; }
    double operator[](std::size_t e) const { return fluxes_[e]; }
    std::size_t size() const { return fluxes_.size(); }

private:
    MeshPtr mesh_;
    std::vector<double> fluxes_;
};

/// Dirichlet samples of S on boundary edges, ordered as Mesh::boundary_edges.
/// Empty values mean the homogeneous problem.
class BoundaryData {
public:
    BoundaryData() = default;
    explicit BoundaryData(MeshPtr mesh) : mesh_(std::move(mesh)) {}
    BoundaryData(MeshPtr mesh, std::vector<double> values)
        : mesh_(std::move(mesh)), values_(std::move(values))
    {
        detail::require(mesh_ != nullptr, "BoundaryData: null mesh");
        detail::require(values_.empty() || values_.size() == mesh_->boundary_edges.size(),
                        "BoundaryData: one value per boundary edge required");
        detail::require_finite_values(values_, "BoundaryData");
    }

    const MeshPtr& mesh() const { return mesh_; }
    bool homogeneous() const
    {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
    }
    /// S_b on the boundary edge in slot `slot` (0 when homogeneous).
    double at_slot(int slot) const { return values_.empty() ? 0.0 : values_[slot]; }
    std::span<const double> values() const { return values_; }

private:
    MeshPtr mesh_;
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Reconstruction inside a cell.

/// Outward fluxes through the four local edges.
inline std::array<double, 4> outward_fluxes(const Cell& cell, std::span<const double> fluxes)
{
    std::array<double, 4> o{};
    for (int i = 0; i < 4; ++i)
        o[i] = cell.signs[i] * fluxes[cell.edges[i]];
    return o;
}

/// Vector value at each corner (bl, br, tr, tl) as a linear map of the outward fluxes:
/// corner_value[q] = sum_i corner_weights[q][i] * outward[i].
inline std::array<std::array<Vec2, 4>, 4> corner_weights(const Cell& cell)
{
    const double ix = 1.0 / cell.width();
    const double iy = 1.0 / cell.height();
    // Normal components on the faces: vy_bottom = -o0/hx, vx_right = o1/hy,
    // vy_top = o2/hx, vx_left = -o3/hy.
    std::array<std::array<Vec2, 4>, 4> w{};
    w[0][3] = {-iy, 0.0};
    w[0][0] = {0.0, -ix};
    w[1][1] = {iy, 0.0};
    w[1][0] = {0.0, -ix};
    w[2][1] = {iy, 0.0};
    w[2][2] = {0.0, ix};
    w[3][3] = {-iy, 0.0};
    w[3][2] = {0.0, ix};
    return w;
}

inline std::array<Vec2, 4> corner_vectors(const Cell& cell, std::span<const double> fluxes)
{
    const auto o = outward_fluxes(cell, fluxes);
    const auto w = corner_weights(cell);
    std::array<Vec2, 4> out{};
    for (int q = 0; q < 4; ++q)
        for (int i = 0; i < 4; ++i) {
            out[q][0] += w[q][i][0] * o[i];
            out[q][1] += w[q][i][1] * o[i];
        }
    return out;
}

/// Lowest-order RT field evaluated at the cell centroid.
inline Vec2 centroid_vector(const Cell& cell, std::span<const double> fluxes)
{
    const auto o = outward_fluxes(cell, fluxes);
    return {(o[1] - o[3]) / (2.0 * cell.height()), (o[2] - o[0]) / (2.0 * cell.width())};
}

/// Lowest-order RT field evaluated at an arbitrary point of the cell.
inline Vec2 point_vector(const Cell& cell, std::span<const double> fluxes, const Vec2& x)
{
    const auto o = outward_fluxes(cell, fluxes);
    const double tx = (x[0] - cell.x0) / cell.width();
    const double ty = (x[1] - cell.y0) / cell.height();
    const double vx = (1.0 - tx) * (-o[3] / cell.height()) + tx * (o[1] / cell.height());
    const double vy = (1.0 - ty) * (-o[0] / cell.width()) + ty * (o[2] / cell.width());
    return {vx, vy};
}

inline std::vector<Vec2> centroid_vectors(const FluxField& v)
{
    const Mesh& mesh = *v.mesh();
    std::vector<Vec2> out(mesh.num_cells());
    for (std::size_t c = 0; c < mesh.num_cells(); ++c)
        out[c] = centroid_vector(mesh.cells[c], v.fluxes());
    return out;
}

// ---------------------------------------------------------------------------
// Divergence and norms.

inline double cell_flux_sum(const Cell& cell, std::span<const double> fluxes)
{
    const auto o = outward_fluxes(cell, fluxes);
    return o[0] + o[1] + o[2] + o[3];
}

inline ScalarField divergence(const FluxField& v)
{
    const Mesh& mesh = *v.mesh();
    std::vector<double> div(mesh.num_cells());
    for (std::size_t c = 0; c < mesh.num_cells(); ++c)
        div[c] = cell_flux_sum(mesh.cells[c], v.fluxes()) / mesh.cell_measures[c];
    return {v.mesh(), std::move(div)};
}

/// (sum area |q|^p)^(1/p).
inline double lp_norm(const ScalarField& q, double p)
{
    detail::require(p >= 1.0, "lp_norm: exponent must be >= 1");
    const Mesh& mesh = *q.mesh();
    double s = 0.0;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c)
        s += mesh.cell_measures[c] * std::pow(std::abs(q[c]), p);
    return std::pow(s, 1.0 / p);
}

/// sum over cells and corners of area/4 |v(corner)|^p: the vector part of the flux norms.
inline double flux_lp_integral(const FluxField& v, double p)
{
    const Mesh& mesh = *v.mesh();
    double s = 0.0;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        const auto corners = corner_vectors(mesh.cells[c], v.fluxes());
        double local = 0.0;
        for (const auto& u : corners)
            local += std::pow(norm(u), p);
        s += 0.25 * mesh.cell_measures[c] * local;
    }
    return s;
}

/// ||v||_{0,p}: L^p norm of the reconstructed vector field.
inline double flux_lp_norm(const FluxField& v, double p)
{
    detail::require(p >= 1.0, "flux_lp_norm: exponent must be >= 1");
    return std::pow(flux_lp_integral(v, p), 1.0 / p);
}

/// W^s(div) norm: (int |v|^s + int |div v|^s)^(1/s).
inline double ws_div_norm(const FluxField& v, double s)
{
    detail::require(s >= 1.0, "ws_div_norm: exponent must be >= 1");
    const ScalarField div = divergence(v);
    const double vec = flux_lp_integral(v, s);
    const double dv = std::pow(lp_norm(div, s), s);
    return std::pow(vec + dv, 1.0 / s);
}

// ---------------------------------------------------------------------------
// Field arithmetic.

inline ScalarField axpy(double a, const ScalarField& x, const ScalarField& y)
{
    detail::require_same_mesh(x.mesh(), y.mesh(), "axpy");
    std::vector<double> out(y.values().begin(), y.values().end());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += a * x[i];
    return {y.mesh(), std::move(out)};
}

inline FluxField axpy(double a, const FluxField& x, const FluxField& y)
{
    detail::require_same_mesh(x.mesh(), y.mesh(), "axpy");
    std::vector<double> out(y.fluxes().begin(), y.fluxes().end());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += a * x[i];
    return {y.mesh(), std::move(out)};
}

inline ScalarField operator-(const ScalarField& a, const ScalarField& b) { return axpy(-1.0, b, a); }
inline FluxField operator-(const FluxField& a, const FluxField& b) { return axpy(-1.0, b, a); }

// ---------------------------------------------------------------------------
// Quadrature and interpolation.

namespace detail {

/// Gauss-Legendre nodes/weights on [0, 1].
inline void gauss_rule(int n, std::vector<double>& x, std::vector<double>& w)
{
    switch (n) {
    case 1:
        x = {0.5};
        w = {1.0};
        break;
    case 2: {
        const double a = 0.5 / std::sqrt(3.0);
        x = {0.5 - a, 0.5 + a};
        w = {0.5, 0.5};
        break;
    }
    case 3: {
        const double a = 0.5 * std::sqrt(0.6);
        x = {0.5 - a, 0.5, 0.5 + a};
        w = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
        break;
    }
    default: {
        const double a = 0.5 * 0.8611363115940526, b = 0.5 * 0.3399810435848563;
        const double wa = 0.5 * 0.3478548451374538, wb = 0.5 * 0.6521451548625461;
        x = {0.5 - a, 0.5 - b, 0.5 + b, 0.5 + a};
        w = {wa, wb, wb, wa};
        break;
    }
    }
}

} // namespace detail

using PointFunction = std::function<double(const Vec2&)>;
using VectorFunction = std::function<Vec2(const Vec2&)>;

/// Cell averages by tensor Gauss quadrature on `sub` x `sub` sub-cells.
inline ScalarField cell_averages(const MeshPtr& mesh, const PointFunction& fn, int order = 3,
                                 int sub = 1)
{
    std::vector<double> gx, gw;
    detail::gauss_rule(order, gx, gw);
    std::vector<double> out(mesh->num_cells());
    for (std::size_t c = 0; c < mesh->num_cells(); ++c) {
        const Cell& cell = mesh->cells[c];
        const double dx = cell.width() / sub, dy = cell.height() / sub;
        double acc = 0.0;
        for (int si = 0; si < sub; ++si)
            for (int sj = 0; sj < sub; ++sj)
                for (std::size_t a = 0; a < gx.size(); ++a)
                    for (std::size_t b = 0; b < gx.size(); ++b) {
                        const Vec2 p{cell.x0 + (si + gx[a]) * dx, cell.y0 + (sj + gx[b]) * dy};
                        acc += gw[a] * gw[b] * fn(p);
                    }
        out[c] = acc / (sub * sub);
    }
    return {mesh, std::move(out)};
}

/// Values at cell centroids.
inline ScalarField sample_centroids(const MeshPtr& mesh, const PointFunction& fn)
{
    std::vector<double> out(mesh->num_cells());
    for (std::size_t c = 0; c < mesh->num_cells(); ++c)
        out[c] = fn(mesh->cells[c].centroid());
    return {mesh, std::move(out)};
}

/// Edge-flux interpolant: flux_e = int_e v . n_e ds (Gauss rule along the edge).
inline FluxField interpolate_flux(const MeshPtr& mesh, const VectorFunction& fn, int order = 3)
{
    std::vector<double> gx, gw;
    detail::gauss_rule(order, gx, gw);
    std::vector<double> out(mesh->num_edges());
    for (std::size_t e = 0; e < mesh->num_edges(); ++e) {
        const Edge& edge = mesh->edges[e];
        const Vec2& a = mesh->vertices[edge.vertices[0]];
        const Vec2& b = mesh->vertices[edge.vertices[1]];
        double acc = 0.0;
        for (std::size_t k = 0; k < gx.size(); ++k) {
            const Vec2 p{a[0] + gx[k] * (b[0] - a[0]), a[1] + gx[k] * (b[1] - a[1])};
            acc += gw[k] * dot(fn(p), edge.normal);
        }
        out[e] = acc * edge.length;
    }
    return {mesh, std::move(out)};
}

/// Boundary data sampled at boundary-edge midpoints.
inline BoundaryData sample_boundary(const MeshPtr& mesh, const PointFunction& fn)
{
    std::vector<double> out;
    out.reserve(mesh->boundary_edges.size());
    for (int e : mesh->boundary_edges)
        out.push_back(fn(mesh->edges[e].midpoint));
    return {mesh, std::move(out)};
}

} // namespace dfmix
