#pragma once

// Legacy ASCII VTK output (UNSTRUCTURED_GRID) for meshes and fields.

#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dfmix/grid.hpp"

namespace dfmix {

struct VtkFields {
    std::vector<std::pair<std::string, const ScalarField*>> scalars;
    /// Written as cell-centered vectors (centroid reconstruction).
    std::vector<std::pair<std::string, const FluxField*>> fluxes;
};

inline void write_vtk(std::ostream& os, const Mesh& mesh, const VtkFields& fields,
                      const std::string& title = "dfmix")
{
    os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << std::setprecision(17);
    os << "POINTS " << mesh.num_vertices() << " double\n";
    for (const auto& v : mesh.vertices)
        os << v[0] << ' ' << v[1] << " 0\n";
    os << "CELLS " << mesh.num_cells() << ' ' << 5 * mesh.num_cells() << '\n';
    for (const auto& c : mesh.cells)
        os << "4 " << c.vertices[0] << ' ' << c.vertices[1] << ' ' << c.vertices[2] << ' '
           << c.vertices[3] << '\n';
    os << "CELL_TYPES " << mesh.num_cells() << '\n';
    for (std::size_t c = 0; c < mesh.num_cells(); ++c)
        os << "9\n"; // VTK_QUAD

    if (fields.scalars.empty() && fields.fluxes.empty())
        return;
    os << "CELL_DATA " << mesh.num_cells() << '\n';
    for (const auto& [name, field] : fields.scalars) {
        detail::require(field->mesh().get() == &mesh, "write_vtk: field on a different mesh");
        os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (double v : field->values())
            os << v << '\n';
    }
    for (const auto& [name, field] : fields.fluxes) {
        detail::require(field->mesh().get() == &mesh, "write_vtk: field on a different mesh");
        os << "VECTORS " << name << " double\n";
        for (const auto& cell : mesh.cells) {
            const Vec2 u = centroid_vector(cell, field->fluxes());
            os << u[0] << ' ' << u[1] << " 0\n";
        }
    }
}

inline void write_vtk(const std::string& path, const Mesh& mesh, const VtkFields& fields,
                      const std::string& title = "dfmix")
{
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("write_vtk: cannot open " + path);
    write_vtk(os, mesh, fields, title);
}

} // namespace dfmix
