#pragma once

#include <array>
#include <vector>

namespace cdanse {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

enum class BoundaryTag { Lid, Wall };

struct BoundaryEdge {
    int a;
    int b;
    BoundaryTag tag;
};

/// Structured triangulation of the unit square. Each grid square is split by
/// its SW-NE diagonal; triangles are counterclockwise. Immutable after build.
struct Mesh {
    int n = 0;  // cells per side of the generating grid
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<BoundaryEdge> boundary_edges;
};

Mesh uniform_cavity_mesh(int n);

double triangle_signed_area(const Mesh& mesh, int t);

/// Uniform N x N partition of (0,1)^2 used to carry the measurement data.
struct CoarseGrid {
    int N = 0;
    double H = 0.0;
    std::vector<Vec2> cell_midpoints;  // row-major, x index fastest

    static CoarseGrid make(int N);

    /// Cell owning a point; points on an internal cell boundary belong to the
    /// lower-index cell.
    int cell_of(Vec2 p) const;
};

/// For each coarse cell (row-major) the mesh vertex closest to the cell
/// midpoint; ties broken by smallest vertex index.
std::vector<int> locate_observation_vertices(const Mesh& mesh, const CoarseGrid& grid);

}  // namespace cdanse
