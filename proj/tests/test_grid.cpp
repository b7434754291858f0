#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dfmix/grid.hpp"
#include "dfmix/vtk.hpp"

using namespace dfmix;

namespace {

int count_interior(const Mesh& m)
{
    int n = 0;
    for (const auto& e : m.edges)
        n += e.on_boundary() ? 0 : 1;
    return n;
}

FluxField random_flux(const MeshPtr& mesh, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> f(mesh->num_edges());
    for (auto& v : f)
        v = u(rng);
    return {mesh, f};
}

} // namespace

TEST(Mesh, Counts)
{
    auto m1 = build_structured_mesh(1, 1);
    EXPECT_EQ(m1->num_cells(), 1u);
    EXPECT_EQ(m1->boundary_edges.size(), 4u);
    EXPECT_EQ(count_interior(*m1), 0);

    auto m2 = build_structured_mesh(2, 2);
    EXPECT_EQ(m2->num_cells(), 4u);
    EXPECT_EQ(count_interior(*m2), 4);
    EXPECT_EQ(m2->boundary_edges.size(), 8u);

    auto m3 = build_structured_mesh(3, 1, {0, 3, 0, 1});
    for (double a : m3->cell_measures)
        EXPECT_DOUBLE_EQ(a, 1.0);
}

TEST(Mesh, Errors)
{
    EXPECT_THROW(build_structured_mesh(0, 1), ContractError);
    EXPECT_THROW(build_structured_mesh(1, 0), ContractError);
    EXPECT_THROW(build_structured_mesh(2, 2, {0, 0, 0, 1}), ContractError);
}

TEST(Mesh, InvariantsAndOutwardNormals)
{
    for (int n : {1, 2, 3, 7}) {
        auto m = build_structured_mesh(n, n + 1, {-1, 2, 0, 0.5});
        EXPECT_NO_THROW(m->validate());
        double total = 0.0;
        for (double a : m->cell_measures)
            total += a;
        EXPECT_NEAR(total, 1.5, 1e-14);
        for (int e : m->boundary_edges) {
            const Edge& edge = m->edges[e];
            const Cell& cell = m->cells[edge.cells[0]];
            const Vec2 c = cell.centroid();
            const Vec2 d{edge.midpoint[0] - c[0], edge.midpoint[1] - c[1]};
            EXPECT_GT(dot(d, edge.normal), 0.0);
            EXPECT_EQ(edge.cells[1], -1);
        }
        for (const auto& edge : m->edges) {
            const Vec2& a = m->vertices[edge.vertices[0]];
            const Vec2& b = m->vertices[edge.vertices[1]];
            EXPECT_NEAR(std::hypot(b[0] - a[0], b[1] - a[1]), edge.length, 1e-14);
            EXPECT_NEAR(norm(edge.normal), 1.0, 1e-15);
        }
    }
}

TEST(Divergence, Examples)
{
    auto mesh = build_structured_mesh(3, 2);
    auto c = interpolate_flux(mesh, [](const Vec2&) { return Vec2{1, 0}; });
    const auto dc = divergence(c);
    for (double d : dc.values())
        EXPECT_NEAR(d, 0.0, 1e-14);

    auto m2 = build_structured_mesh(2, 2);
    auto lin = interpolate_flux(m2, [](const Vec2& x) { return Vec2{x[0], x[1]}; });
    const auto dl = divergence(lin);
    for (double d : dl.values())
        EXPECT_NEAR(d, 2.0, 1e-14);

    const auto dz = divergence(FluxField::zeros(m2));
    for (double d : dz.values())
        EXPECT_EQ(d, 0.0);
}

TEST(Divergence, Linear)
{
    std::mt19937_64 rng(5);
    auto mesh = build_structured_mesh(4, 3);
    const auto u = random_flux(mesh, rng), v = random_flux(mesh, rng);
    const double a = 0.75, b = -2.0;
    std::vector<double> w(mesh->num_edges());
    for (std::size_t e = 0; e < w.size(); ++e)
        w[e] = a * u[e] + b * v[e];
    const auto dw = divergence(FluxField(mesh, w));
    const auto du = divergence(u), dv = divergence(v);
    for (std::size_t c = 0; c < mesh->num_cells(); ++c)
        EXPECT_NEAR(dw[c], a * du[c] + b * dv[c], 1e-13);
}

// Summation by parts: sum_c q_c (flux sum)_c = sum over interior edges of jump terms
// plus boundary terms with q from the adjacent cell.
TEST(Divergence, DiscreteGreen)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int n = 1; n <= 16; n *= 2) {
        auto mesh = build_structured_mesh(n, n);
        const auto v = random_flux(mesh, rng);
        std::vector<double> q(mesh->num_cells());
        for (auto& x : q)
            x = u(rng);
        double lhs = 0.0;
        for (std::size_t c = 0; c < mesh->num_cells(); ++c)
            lhs += q[c] * cell_flux_sum(mesh->cells[c], v.fluxes());
        double rhs = 0.0;
        for (std::size_t e = 0; e < mesh->num_edges(); ++e) {
            const Edge& edge = mesh->edges[e];
            const double qin = q[edge.cells[0]];
            const double qout = edge.cells[1] >= 0 ? q[edge.cells[1]] : 0.0;
            rhs += (qin - qout) * v[e];
        }
        EXPECT_NEAR(lhs, rhs, 1e-12);

        // q = 1: total boundary outflow.
        double total = 0.0, boundary = 0.0;
        for (std::size_t c = 0; c < mesh->num_cells(); ++c)
            total += cell_flux_sum(mesh->cells[c], v.fluxes());
        for (int e : mesh->boundary_edges)
            boundary += v[e];
        EXPECT_NEAR(total, boundary, 1e-12);
    }
}

TEST(Norms, WsDivExamples)
{
    auto mesh = build_structured_mesh(1, 1);
    EXPECT_EQ(ws_div_norm(FluxField::zeros(mesh), 3), 0.0);
    auto c = interpolate_flux(mesh, [](const Vec2&) { return Vec2{1, 0}; });
    EXPECT_NEAR(ws_div_norm(c, 3), 1.0, 1e-14);

    auto fine = build_structured_mesh(16, 16);
    auto v = interpolate_flux(fine, [](const Vec2& x) { return Vec2{x[0], 0}; });
    EXPECT_NEAR(ws_div_norm(v, 2), std::sqrt(1.0 / 3.0 + 1.0), 1e-2 * fine->h());

    EXPECT_THROW(ws_div_norm(v, 0.5), ContractError);
}

TEST(Norms, WsDivZeroIffZero)
{
    std::mt19937_64 rng(1);
    auto mesh = build_structured_mesh(3, 3);
    for (int i = 0; i < 50; ++i)
        EXPECT_GT(ws_div_norm(random_flux(mesh, rng), 3), 0.0);
    // A single nonzero flux on any edge is seen by the norm.
    for (std::size_t e = 0; e < mesh->num_edges(); ++e) {
        auto f = FluxField::zeros(mesh);
        f.data()[e] = 1e-3;
        EXPECT_GT(ws_div_norm(f, 3), 0.0);
    }
}

TEST(Norms, LpExamples)
{
    auto mesh = build_structured_mesh(2, 3);
    EXPECT_NEAR(lp_norm(ScalarField::constant(mesh, 1), 1.5), 1.0, 1e-14);
    EXPECT_NEAR(lp_norm(ScalarField::constant(mesh, 2), 3), 2.0, 1e-14);
    EXPECT_EQ(lp_norm(ScalarField::zeros(mesh), 1.5), 0.0);
    EXPECT_THROW(lp_norm(ScalarField::zeros(mesh), 0.9), ContractError);
}

TEST(Fields, Contracts)
{
    auto mesh = build_structured_mesh(2, 2);
    EXPECT_THROW(ScalarField(mesh, {1, 2}), ContractError);
    EXPECT_THROW(FluxField(mesh, {1}), ContractError);
    EXPECT_THROW(ScalarField(mesh, {1, 2, 3, std::nan("")}), DomainError);
    auto other = build_structured_mesh(2, 2);
    EXPECT_THROW(ScalarField::zeros(mesh) - ScalarField::zeros(other), ContractError);
}

TEST(Reconstruction, ReproducesLinearFields)
{
    auto mesh = build_structured_mesh(3, 2, {0, 1.5, -1, 1});
    auto fn = [](const Vec2& x) { return Vec2{2 * x[0] - 1, 0.5 - 3 * x[1]}; };
    auto v = interpolate_flux(mesh, fn);
    for (const auto& cell : mesh->cells) {
        const Vec2 p{cell.x0 + 0.3 * cell.width(), cell.y0 + 0.8 * cell.height()};
        const Vec2 got = point_vector(cell, v.fluxes(), p);
        EXPECT_NEAR(got[0], fn(p)[0], 1e-13);
        EXPECT_NEAR(got[1], fn(p)[1], 1e-13);
        const auto cv = centroid_vector(cell, v.fluxes());
        EXPECT_NEAR(cv[0], fn(cell.centroid())[0], 1e-13);
        EXPECT_NEAR(cv[1], fn(cell.centroid())[1], 1e-13);
    }
}

TEST(Quadrature, CellAverages)
{
    auto mesh = build_structured_mesh(2, 2);
    auto avg = cell_averages(mesh, [](const Vec2& x) { return x[0] * x[0] * x[1]; });
    // Cell [0,.5]x[0,.5]: mean of x^2 = 1/12, mean of y = 1/4.
    EXPECT_NEAR(avg[0], 1.0 / 48.0, 1e-15);
}

TEST(Vtk, WritesHeaderAndData)
{
    auto mesh = build_structured_mesh(2, 1);
    auto s = ScalarField::constant(mesh, 3.0);
    auto m = FluxField::zeros(mesh);
    std::ostringstream os;
    write_vtk(os, *mesh, {{{"S", &s}}, {{"m", &m}}});
    const auto txt = os.str();
    EXPECT_NE(txt.find("DATASET UNSTRUCTURED_GRID"), std::string::npos);
    EXPECT_NE(txt.find("POINTS 6 double"), std::string::npos);
    EXPECT_NE(txt.find("CELL_DATA 2"), std::string::npos);
    EXPECT_NE(txt.find("SCALARS S double 1"), std::string::npos);
    EXPECT_NE(txt.find("VECTORS m double"), std::string::npos);
}
