#include "cdanse/mesh.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cdanse {

namespace {
constexpr double kLidTol = 1e-12;
}

Mesh uniform_cavity_mesh(int n) {
    if (n < 2) throw std::invalid_argument("uniform_cavity_mesh: n must be >= 2");

    Mesh mesh;
    mesh.n = n;
    mesh.vertices.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
    const double h = 1.0 / n;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            mesh.vertices.push_back({i * h, j * h});

    auto vid = [n](int i, int j) { return j * (n + 1) + i; };

    mesh.triangles.reserve(static_cast<std::size_t>(2) * n * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int v00 = vid(i, j), v10 = vid(i + 1, j);
            const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
            // SW-NE diagonal: v00 -- v11
            mesh.triangles.push_back({v00, v10, v11});
            mesh.triangles.push_back({v00, v11, v01});
        }
    }

    auto tag_of = [&](int a, int b) {
        const bool lid = std::abs(mesh.vertices[a].y - 1.0) < kLidTol &&
                         std::abs(mesh.vertices[b].y - 1.0) < kLidTol;
        return lid ? BoundaryTag::Lid : BoundaryTag::Wall;
    };
    for (int i = 0; i < n; ++i) {
        mesh.boundary_edges.push_back({vid(i, 0), vid(i + 1, 0), tag_of(vid(i, 0), vid(i + 1, 0))});
        mesh.boundary_edges.push_back({vid(i, n), vid(i + 1, n), tag_of(vid(i, n), vid(i + 1, n))});
    }
    for (int j = 0; j < n; ++j) {
        mesh.boundary_edges.push_back({vid(0, j), vid(0, j + 1), tag_of(vid(0, j), vid(0, j + 1))});
        mesh.boundary_edges.push_back({vid(n, j), vid(n, j + 1), tag_of(vid(n, j), vid(n, j + 1))});
    }
    return mesh;
}

double triangle_signed_area(const Mesh& mesh, int t) {
    const auto& tri = mesh.triangles[t];
    const Vec2 a = mesh.vertices[tri[0]];
    const Vec2 b = mesh.vertices[tri[1]];
    const Vec2 c = mesh.vertices[tri[2]];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

CoarseGrid CoarseGrid::make(int N) {
    if (N < 1) throw std::invalid_argument("CoarseGrid: N must be >= 1");
    CoarseGrid g;
    g.N = N;
    g.H = 1.0 / N;
    g.cell_midpoints.reserve(static_cast<std::size_t>(N) * N);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i)
            g.cell_midpoints.push_back({(i + 0.5) / N, (j + 0.5) / N});
    return g;
}

int CoarseGrid::cell_of(Vec2 p) const {
    // boundary ties toward lower index: use ceil(x*N)-1 except at the origin
    auto index = [this](double c) {
        if (c <= 0.0) return 0;
        int i = static_cast<int>(std::ceil(c * N)) - 1;
        if (i < 0) i = 0;
        if (i >= N) i = N - 1;
        return i;
    };
    return index(p.y) * N + index(p.x);
}

std::vector<int> locate_observation_vertices(const Mesh& mesh, const CoarseGrid& grid) {
    std::vector<int> out;
    out.reserve(grid.cell_midpoints.size());
    for (const Vec2 mid : grid.cell_midpoints) {
        int best = 0;
        double best_d2 = std::numeric_limits<double>::max();
        for (int v = 0; v < static_cast<int>(mesh.vertices.size()); ++v) {
            const double dx = mesh.vertices[v].x - mid.x;
            const double dy = mesh.vertices[v].y - mid.y;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2) {
                best_d2 = d2;
                best = v;
            }
        }
        out.push_back(best);
    }
    return out;
}

}  // namespace cdanse
