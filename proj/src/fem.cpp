#include "cdanse/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace cdanse {

namespace {

constexpr double kLidTol = 1e-12;

void require_velocity(const Field& u, const DofMap& dm, const char* where) {
    if (u.dofmap != &dm || static_cast<int>(u.coeffs.size()) != dm.n_u)
        throw std::invalid_argument(std::string(where) + ": velocity field does not match dofmap");
}

}  // namespace

DofMap DofMap::build(const Mesh& mesh) {
    DofMap dm;
    dm.mesh = &mesh;
    const int nv = static_cast<int>(mesh.vertices.size());

    std::unordered_map<std::int64_t, int> edge_ids;
    edge_ids.reserve(mesh.triangles.size() * 2);
    auto edge_of = [&](int a, int b) {
        const int lo = std::min(a, b), hi = std::max(a, b);
        const std::int64_t key = static_cast<std::int64_t>(lo) * nv + hi;
        auto [it, inserted] = edge_ids.try_emplace(key, static_cast<int>(dm.edges.size()));
        if (inserted) dm.edges.push_back({lo, hi});
        return it->second;
    };

    dm.triangle_edges.reserve(mesh.triangles.size());
    for (const auto& tri : mesh.triangles)
        dm.triangle_edges.push_back(
            {edge_of(tri[0], tri[1]), edge_of(tri[1], tri[2]), edge_of(tri[2], tri[0])});

    dm.node_coords = mesh.vertices;
    dm.node_coords.reserve(nv + dm.edges.size());
    for (const auto& e : dm.edges) {
        const Vec2 a = mesh.vertices[e[0]], b = mesh.vertices[e[1]];
        dm.node_coords.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
    }

    dm.n_u = 2 * (nv + static_cast<int>(dm.edges.size()));
    dm.n_p = nv;
    return dm;
}

std::array<int, 6> DofMap::element_nodes(int t) const {
    const auto& tri = mesh->triangles[t];
    const auto& te = triangle_edges[t];
    const int nv = n_vertices();
    return {tri[0], tri[1], tri[2], nv + te[0], nv + te[1], nv + te[2]};
}

Field interpolate_velocity(const DofMap& dm, const std::function<Vec2(Vec2)>& f) {
    Field u = Field::zero_velocity(dm);
    for (int node = 0; node < dm.velocity_nodes(); ++node) {
        const Vec2 v = f(dm.node_coords[node]);
        u.coeffs[dm.u_dof(node, 0)] = v.x;
        u.coeffs[dm.u_dof(node, 1)] = v.y;
    }
    return u;
}

Field interpolate_pressure(const DofMap& dm, const std::function<double(Vec2)>& f) {
    Field p = Field::zero_pressure(dm);
    for (int v = 0; v < dm.n_vertices(); ++v) p.coeffs[v] = f(dm.mesh->vertices[v]);
    return p;
}

Vec2 velocity_at_vertex(const Field& u, int vertex) {
    const DofMap& dm = *u.dofmap;
    if (vertex < 0 || vertex >= dm.n_vertices())
        throw std::out_of_range("velocity_at_vertex: vertex index out of range");
    return {u.coeffs[dm.u_dof(vertex, 0)], u.coeffs[dm.u_dof(vertex, 1)]};
}

ElementGeometry element_geometry(const Mesh& mesh, int t) {
    ElementGeometry g;
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) g.verts[i] = mesh.vertices[tri[i]];
    const Vec2 a = g.verts[0], b = g.verts[1], c = g.verts[2];
    g.area = 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
    const double inv2A = 1.0 / (2.0 * g.area);
    g.grad_lambda[0] = {(b.y - c.y) * inv2A, (c.x - b.x) * inv2A};
    g.grad_lambda[1] = {(c.y - a.y) * inv2A, (a.x - c.x) * inv2A};
    g.grad_lambda[2] = {(a.y - b.y) * inv2A, (b.x - a.x) * inv2A};
    return g;
}

void p2_basis(const ElementGeometry& g, double x, double y,
              std::array<double, 6>& val, std::array<Vec2, 6>& grad) {
    const double l0 = 1.0 - x - y, l1 = x, l2 = y;
    const std::array<double, 3> l = {l0, l1, l2};
    for (int i = 0; i < 3; ++i) {
        val[i] = l[i] * (2.0 * l[i] - 1.0);
        grad[i] = {(4.0 * l[i] - 1.0) * g.grad_lambda[i].x, (4.0 * l[i] - 1.0) * g.grad_lambda[i].y};
    }
    const std::array<std::array<int, 2>, 3> pairs = {{{0, 1}, {1, 2}, {2, 0}}};
    for (int e = 0; e < 3; ++e) {
        const int i = pairs[e][0], j = pairs[e][1];
        val[3 + e] = 4.0 * l[i] * l[j];
        grad[3 + e] = {4.0 * (l[j] * g.grad_lambda[i].x + l[i] * g.grad_lambda[j].x),
                       4.0 * (l[j] * g.grad_lambda[i].y + l[i] * g.grad_lambda[j].y)};
    }
}

void eval_velocity(const Field& u, int t, double x, double y, Vec2& value,
                   std::array<double, 4>& grad_out) {
    const DofMap& dm = *u.dofmap;
    const ElementGeometry g = element_geometry(*dm.mesh, t);
    std::array<double, 6> val;
    std::array<Vec2, 6> grad;
    p2_basis(g, x, y, val, grad);
    const auto nodes = dm.element_nodes(t);
    value = {0.0, 0.0};
    grad_out = {0.0, 0.0, 0.0, 0.0};
    for (int a = 0; a < 6; ++a) {
        const double cx = u.coeffs[dm.u_dof(nodes[a], 0)];
        const double cy = u.coeffs[dm.u_dof(nodes[a], 1)];
        value.x += cx * val[a];
        value.y += cy * val[a];
        grad_out[0] += cx * grad[a].x;
        grad_out[1] += cx * grad[a].y;
        grad_out[2] += cy * grad[a].x;
        grad_out[3] += cy * grad[a].y;
    }
}

std::vector<linalg::Triplet> viscous_graddiv_triplets(const DofMap& dm, double nu, double gamma_gd) {
    if (nu <= 0.0) throw std::invalid_argument("assemble_viscous_graddiv: nu must be positive");
    if (gamma_gd < 0.0) throw std::invalid_argument("assemble_viscous_graddiv: gamma_gd must be nonnegative");

    const Mesh& mesh = *dm.mesh;
    const auto rule = triangle_rule_degree5();
    std::vector<linalg::Triplet> out;
    out.reserve(mesh.triangles.size() * 144);

    std::array<double, 6> val;
    std::array<Vec2, 6> grad;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const auto nodes = dm.element_nodes(t);
        const double jac = 2.0 * g.area;
        std::array<std::array<double, 12>, 12> ke{};  // local dof = 2*a + comp
        for (const QuadPoint& q : rule) {
            p2_basis(g, q.x, q.y, val, grad);
            const double w = q.w * jac;
            for (int a = 0; a < 6; ++a) {
                for (int b = 0; b < 6; ++b) {
                    const double visc = nu * (grad[a].x * grad[b].x + grad[a].y * grad[b].y) * w;
                    ke[2 * a][2 * b] += visc;
                    ke[2 * a + 1][2 * b + 1] += visc;
                    if (gamma_gd > 0.0) {
                        const std::array<double, 2> da = {grad[a].x, grad[a].y};
                        const std::array<double, 2> db = {grad[b].x, grad[b].y};
                        for (int c = 0; c < 2; ++c)
                            for (int d = 0; d < 2; ++d)
                                ke[2 * a + c][2 * b + d] += gamma_gd * da[c] * db[d] * w;
                    }
                }
            }
        }
        for (int a = 0; a < 6; ++a)
            for (int c = 0; c < 2; ++c)
                for (int b = 0; b < 6; ++b)
                    for (int d = 0; d < 2; ++d)
                        out.push_back({dm.u_dof(nodes[a], c), dm.u_dof(nodes[b], d),
                                       ke[2 * a + c][2 * b + d]});
    }
    return out;
}

linalg::SparseMatrix assemble_viscous_graddiv(const DofMap& dm, double nu, double gamma_gd) {
    const auto t = viscous_graddiv_triplets(dm, nu, gamma_gd);
    return linalg::SparseMatrix::from_triplets(dm.n_u, t);
}

std::vector<linalg::Triplet> convection_triplets(const DofMap& dm, const Field& w) {
    require_velocity(w, dm, "assemble_convection");

    const Mesh& mesh = *dm.mesh;
    const auto rule = triangle_rule_degree5();
    std::vector<linalg::Triplet> out;
    out.reserve(mesh.triangles.size() * 72);

    std::array<double, 6> val;
    std::array<Vec2, 6> grad;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const auto nodes = dm.element_nodes(t);
        const double jac = 2.0 * g.area;
        std::array<std::array<double, 6>, 6> ke{};  // component-diagonal block
        for (const QuadPoint& q : rule) {
            p2_basis(g, q.x, q.y, val, grad);
            Vec2 wq{0.0, 0.0};
            double divw = 0.0;
            for (int a = 0; a < 6; ++a) {
                const double cx = w.coeffs[dm.u_dof(nodes[a], 0)];
                const double cy = w.coeffs[dm.u_dof(nodes[a], 1)];
                wq.x += cx * val[a];
                wq.y += cy * val[a];
                divw += cx * grad[a].x + cy * grad[a].y;
            }
            const double wt = q.w * jac;
            for (int a = 0; a < 6; ++a)
                for (int b = 0; b < 6; ++b)
                    ke[a][b] += wt * val[a] *
                                ((wq.x * grad[b].x + wq.y * grad[b].y) + 0.5 * divw * val[b]);
        }
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b)
                for (int c = 0; c < 2; ++c)
                    out.push_back({dm.u_dof(nodes[a], c), dm.u_dof(nodes[b], c), ke[a][b]});
    }
    return out;
}

linalg::SparseMatrix assemble_convection(const DofMap& dm, const Field& w) {
    const auto t = convection_triplets(dm, w);
    return linalg::SparseMatrix::from_triplets(dm.n_u, t);
}

std::pair<std::vector<linalg::Triplet>, std::vector<double>>
newton_linearization_triplets(const DofMap& dm, const Field& w) {
    require_velocity(w, dm, "assemble_newton_linearization");

    const Mesh& mesh = *dm.mesh;
    const auto rule = triangle_rule_degree5();
    std::vector<linalg::Triplet> trips;
    trips.reserve(mesh.triangles.size() * 144);
    std::vector<double> rhs(dm.n_u, 0.0);

    std::array<double, 6> val;
    std::array<Vec2, 6> grad;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const auto nodes = dm.element_nodes(t);
        const double jac = 2.0 * g.area;
        std::array<std::array<double, 12>, 12> ke{};
        std::array<double, 12> fe{};
        for (const QuadPoint& q : rule) {
            p2_basis(g, q.x, q.y, val, grad);
            Vec2 wq{0.0, 0.0};
            std::array<double, 4> gw{};  // wx_x, wx_y, wy_x, wy_y
            for (int a = 0; a < 6; ++a) {
                const double cx = w.coeffs[dm.u_dof(nodes[a], 0)];
                const double cy = w.coeffs[dm.u_dof(nodes[a], 1)];
                wq.x += cx * val[a];
                wq.y += cy * val[a];
                gw[0] += cx * grad[a].x;
                gw[1] += cx * grad[a].y;
                gw[2] += cy * grad[a].x;
                gw[3] += cy * grad[a].y;
            }
            const double divw = gw[0] + gw[3];
            const double wt = q.w * jac;
            const std::array<double, 2> wc = {wq.x, wq.y};
            // b*(z, w, v): (z . grad) w . v + 1/2 (div z)(w . v)
            for (int a = 0; a < 6; ++a) {
                for (int b = 0; b < 6; ++b) {
                    const std::array<double, 2> db = {grad[b].x, grad[b].y};
                    for (int c = 0; c < 2; ++c)
                        for (int d = 0; d < 2; ++d)
                            ke[2 * a + c][2 * b + d] +=
                                wt * val[a] * (val[b] * gw[2 * c + d] + 0.5 * db[d] * wc[c]);
                }
                // b*(w, w, v)
                const std::array<double, 2> conv = {wq.x * gw[0] + wq.y * gw[1],
                                                    wq.x * gw[2] + wq.y * gw[3]};
                for (int c = 0; c < 2; ++c)
                    fe[2 * a + c] += wt * val[a] * (conv[c] + 0.5 * divw * wc[c]);
            }
        }
        for (int a = 0; a < 6; ++a)
            for (int c = 0; c < 2; ++c) {
                rhs[dm.u_dof(nodes[a], c)] += fe[2 * a + c];
                for (int b = 0; b < 6; ++b)
                    for (int d = 0; d < 2; ++d)
                        trips.push_back({dm.u_dof(nodes[a], c), dm.u_dof(nodes[b], d),
                                         ke[2 * a + c][2 * b + d]});
            }
    }
    return {std::move(trips), std::move(rhs)};
}

std::pair<linalg::SparseMatrix, std::vector<double>>
assemble_newton_linearization(const DofMap& dm, const Field& w) {
    auto [trips, rhs] = newton_linearization_triplets(dm, w);
    return {linalg::SparseMatrix::from_triplets(dm.n_u, trips), std::move(rhs)};
}

std::vector<linalg::Triplet> divergence_coupling_triplets(const DofMap& dm) {
    const Mesh& mesh = *dm.mesh;
    const auto rule = triangle_rule_degree5();
    std::vector<linalg::Triplet> out;
    out.reserve(mesh.triangles.size() * 36);

    std::array<double, 6> val;
    std::array<Vec2, 6> grad;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const auto nodes = dm.element_nodes(t);
        const auto& tri = mesh.triangles[t];
        const double jac = 2.0 * g.area;
        std::array<std::array<double, 12>, 3> ke{};
        for (const QuadPoint& q : rule) {
            p2_basis(g, q.x, q.y, val, grad);
            const std::array<double, 3> psi = {1.0 - q.x - q.y, q.x, q.y};
            const double wt = q.w * jac;
            for (int i = 0; i < 3; ++i)
                for (int b = 0; b < 6; ++b) {
                    ke[i][2 * b] += wt * psi[i] * grad[b].x;
                    ke[i][2 * b + 1] += wt * psi[i] * grad[b].y;
                }
        }
        for (int i = 0; i < 3; ++i)
            for (int b = 0; b < 6; ++b)
                for (int d = 0; d < 2; ++d)
                    out.push_back({dm.p_dof(tri[i]), dm.u_dof(nodes[b], d), ke[i][2 * b + d]});
    }
    return out;
}

linalg::SparseMatrix assemble_divergence_coupling(const DofMap& dm) {
    const auto t = divergence_coupling_triplets(dm);
    return linalg::SparseMatrix::from_triplets(dm.n_u + dm.n_p, t);
}

std::vector<linalg::Triplet> velocity_mass_triplets(const DofMap& dm) {
    const Mesh& mesh = *dm.mesh;
    const auto rule = triangle_rule_degree5();
    std::vector<linalg::Triplet> out;
    out.reserve(mesh.triangles.size() * 72);

    std::array<double, 6> val;
    std::array<Vec2, 6> grad;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const auto nodes = dm.element_nodes(t);
        const double jac = 2.0 * g.area;
        std::array<std::array<double, 6>, 6> ke{};
        for (const QuadPoint& q : rule) {
            p2_basis(g, q.x, q.y, val, grad);
            const double wt = q.w * jac;
            for (int a = 0; a < 6; ++a)
                for (int b = 0; b < 6; ++b) ke[a][b] += wt * val[a] * val[b];
        }
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b)
                for (int c = 0; c < 2; ++c)
                    out.push_back({dm.u_dof(nodes[a], c), dm.u_dof(nodes[b], c), ke[a][b]});
    }
    return out;
}

std::vector<double> assemble_forcing(const DofMap& dm, const std::function<Vec2(Vec2)>& f) {
    const Mesh& mesh = *dm.mesh;
    const auto rule = triangle_rule_degree7();  // f is generally non-polynomial
    std::vector<double> rhs(dm.n_u, 0.0);

    std::array<double, 6> val;
    std::array<Vec2, 6> grad;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const auto nodes = dm.element_nodes(t);
        const double jac = 2.0 * g.area;
        for (const QuadPoint& q : rule) {
            p2_basis(g, q.x, q.y, val, grad);
            const Vec2 p = {g.verts[0].x + (g.verts[1].x - g.verts[0].x) * q.x +
                                (g.verts[2].x - g.verts[0].x) * q.y,
                            g.verts[0].y + (g.verts[1].y - g.verts[0].y) * q.x +
                                (g.verts[2].y - g.verts[0].y) * q.y};
            const Vec2 fv = f(p);
            const double wt = q.w * jac;
            for (int a = 0; a < 6; ++a) {
                rhs[dm.u_dof(nodes[a], 0)] += wt * fv.x * val[a];
                rhs[dm.u_dof(nodes[a], 1)] += wt * fv.y * val[a];
            }
        }
    }
    return rhs;
}

CellValues interpolate_IH(const Field& u, const CoarseGrid& grid, IhMode mode,
                          std::span<const int> obs_vertices) {
    const DofMap& dm = *u.dofmap;
    const int n_cells = grid.N * grid.N;

    if (mode == IhMode::PointValue) {
        if (static_cast<int>(obs_vertices.size()) != n_cells)
            throw std::invalid_argument("interpolate_IH: PointValue mode needs one observation vertex per cell");
        CellValues out(n_cells);
        for (int c = 0; c < n_cells; ++c) out[c] = velocity_at_vertex(u, obs_vertices[c]);
        return out;
    }

    const Mesh& mesh = *dm.mesh;
    if (mesh.n % grid.N != 0)
        throw std::invalid_argument("interpolate_IH: CellAverage requires n divisible by N");

    CellValues out(n_cells, Vec2{0.0, 0.0});
    const auto rule = triangle_rule_degree5();
    std::array<double, 6> val;
    std::array<Vec2, 6> grad;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const Vec2 centroid = {(g.verts[0].x + g.verts[1].x + g.verts[2].x) / 3.0,
                               (g.verts[0].y + g.verts[1].y + g.verts[2].y) / 3.0};
        const int cell = grid.cell_of(centroid);
        const auto nodes = dm.element_nodes(t);
        const double jac = 2.0 * g.area;
        for (const QuadPoint& q : rule) {
            p2_basis(g, q.x, q.y, val, grad);
            const double wt = q.w * jac;
            for (int a = 0; a < 6; ++a) {
                out[cell].x += wt * val[a] * u.coeffs[dm.u_dof(nodes[a], 0)];
                out[cell].y += wt * val[a] * u.coeffs[dm.u_dof(nodes[a], 1)];
            }
        }
    }
    const double inv_area = static_cast<double>(n_cells);  // 1 / H^2
    for (auto& v : out) {
        v.x *= inv_area;
        v.y *= inv_area;
    }
    return out;
}

std::vector<double> NudgingOperator::rhs(const CellValues& observed, int n_u) const {
    std::vector<double> out(n_u, 0.0);
    for (const auto& load : loads) {
        const Vec2 d = observed[load.cell];
        const double dc = load.comp == 0 ? d.x : d.y;
        for (const auto& [dof, w] : load.dofs) out[dof] += mu * w * dc;
    }
    return out;
}

NudgingOperator assemble_nudging(const DofMap& dm, const CoarseGrid& grid,
                                 std::span<const int> obs_vertices, double mu, IhMode mode) {
    if (mu < 0.0) throw std::invalid_argument("assemble_nudging: mu must be nonnegative");
    const int n_cells = grid.N * grid.N;

    NudgingOperator op;
    op.mu = mu;
    op.cell_area = grid.H * grid.H;
    if (mu == 0.0) return op;  // degenerates to exactly the un-nudged system

    if (mode == IhMode::PointValue) {
        if (static_cast<int>(obs_vertices.size()) != n_cells)
            throw std::invalid_argument("assemble_nudging: PointValue mode needs one observation vertex per cell");
        for (int c = 0; c < n_cells; ++c) {
            const int v = obs_vertices[c];
            if (v < 0 || v >= dm.n_vertices())
                throw std::out_of_range("assemble_nudging: observation vertex out of range");
            for (int comp = 0; comp < 2; ++comp) {
                const int dof = dm.u_dof(v, comp);
                op.triplets.push_back({dof, dof, mu * op.cell_area});
                op.loads.push_back({c, comp, {{dof, op.cell_area}}});
            }
        }
        return op;
    }

    const Mesh& mesh = *dm.mesh;
    if (mesh.n % grid.N != 0)
        throw std::invalid_argument("assemble_nudging: CellAverage requires n divisible by N");

    // Per cell, the vector of integrals of each P2 scalar basis over the cell.
    std::vector<std::unordered_map<int, double>> cell_moments(n_cells);
    const auto rule = triangle_rule_degree5();
    std::array<double, 6> val;
    std::array<Vec2, 6> grad;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const Vec2 centroid = {(g.verts[0].x + g.verts[1].x + g.verts[2].x) / 3.0,
                               (g.verts[0].y + g.verts[1].y + g.verts[2].y) / 3.0};
        const int cell = grid.cell_of(centroid);
        const auto nodes = dm.element_nodes(t);
        const double jac = 2.0 * g.area;
        for (const QuadPoint& q : rule) {
            p2_basis(g, q.x, q.y, val, grad);
            for (int a = 0; a < 6; ++a) cell_moments[cell][nodes[a]] += q.w * jac * val[a];
        }
    }

    for (int c = 0; c < n_cells; ++c) {
        std::vector<std::pair<int, double>> moments(cell_moments[c].begin(), cell_moments[c].end());
        std::sort(moments.begin(), moments.end());
        for (int comp = 0; comp < 2; ++comp) {
            NudgingOperator::CellLoad load{c, comp, {}};
            load.dofs.reserve(moments.size());
            for (const auto& [node, m] : moments) load.dofs.push_back({dm.u_dof(node, comp), m});
            for (const auto& [di, mi] : load.dofs)
                for (const auto& [dj, mj] : load.dofs)
                    op.triplets.push_back({di, dj, mu * mi * mj / op.cell_area});
            op.loads.push_back(std::move(load));
        }
    }
    return op;
}

BoundaryConditions lid_boundary_conditions(const DofMap& dm, Vec2 lid_value) {
    const Mesh& mesh = *dm.mesh;
    BoundaryConditions bcs;
    bcs.is_constrained.assign(dm.n_u + dm.n_p, 0);
    bcs.value.assign(dm.n_u + dm.n_p, 0.0);

    std::unordered_map<std::int64_t, int> edge_lookup;
    edge_lookup.reserve(dm.edges.size());
    const int nv = dm.n_vertices();
    for (int e = 0; e < dm.n_edges(); ++e)
        edge_lookup[static_cast<std::int64_t>(dm.edges[e][0]) * nv + dm.edges[e][1]] = e;

    auto constrain_node = [&](int node, Vec2 v) {
        bcs.is_constrained[dm.u_dof(node, 0)] = 1;
        bcs.is_constrained[dm.u_dof(node, 1)] = 1;
        bcs.value[dm.u_dof(node, 0)] = v.x;
        bcs.value[dm.u_dof(node, 1)] = v.y;
    };

    // Walls first; Lid edges override so the two top corners ride with the lid.
    for (int pass = 0; pass < 2; ++pass) {
        const BoundaryTag want = pass == 0 ? BoundaryTag::Wall : BoundaryTag::Lid;
        const Vec2 v = pass == 0 ? Vec2{0.0, 0.0} : lid_value;
        for (const auto& be : mesh.boundary_edges) {
            if (be.tag != want) continue;
            const int lo = std::min(be.a, be.b), hi = std::max(be.a, be.b);
            const int mid = nv + edge_lookup.at(static_cast<std::int64_t>(lo) * nv + hi);
            constrain_node(be.a, v);
            constrain_node(be.b, v);
            constrain_node(mid, v);
        }
    }

    bcs.pinned_pressure_dof = dm.p_dof(0);
    bcs.is_constrained[bcs.pinned_pressure_dof] = 1;
    bcs.value[bcs.pinned_pressure_dof] = 0.0;
    return bcs;
}

AssembledSystem apply_dirichlet(int dim, std::span<const linalg::Triplet> triplets,
                                std::vector<double> rhs, const BoundaryConditions& bcs) {
    std::vector<linalg::Triplet> kept;
    kept.reserve(triplets.size() + dim / 4);
    for (const auto& t : triplets) {
        if (bcs.is_constrained[t.row]) continue;
        if (bcs.is_constrained[t.col]) {
            rhs[t.row] -= t.value * bcs.value[t.col];
            continue;
        }
        kept.push_back(t);
    }
    for (int d = 0; d < dim; ++d) {
        if (!bcs.is_constrained[d]) continue;
        kept.push_back({d, d, 1.0});
        rhs[d] = bcs.value[d];
    }
    AssembledSystem sys;
    sys.matrix = linalg::SparseMatrix::from_triplets(dim, kept);
    sys.rhs = std::move(rhs);
    sys.bcs = &bcs;
    return sys;
}

Norms compute_norms(const Field& u, const Field* reference) {
    const DofMap& dm = *u.dofmap;
    require_velocity(u, dm, "compute_norms");
    if (reference) require_velocity(*reference, dm, "compute_norms(reference)");

    const Mesh& mesh = *dm.mesh;
    const auto rule = triangle_rule_degree5();
    double l2 = 0.0, h1 = 0.0, div2 = 0.0, err = 0.0;
    std::array<double, 6> val;
    std::array<Vec2, 6> grad;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const auto nodes = dm.element_nodes(t);
        const double jac = 2.0 * g.area;
        for (const QuadPoint& q : rule) {
            p2_basis(g, q.x, q.y, val, grad);
            Vec2 uq{0.0, 0.0}, rq{0.0, 0.0};
            std::array<double, 4> gu{};
            for (int a = 0; a < 6; ++a) {
                const double cx = u.coeffs[dm.u_dof(nodes[a], 0)];
                const double cy = u.coeffs[dm.u_dof(nodes[a], 1)];
                uq.x += cx * val[a];
                uq.y += cy * val[a];
                gu[0] += cx * grad[a].x;
                gu[1] += cx * grad[a].y;
                gu[2] += cy * grad[a].x;
                gu[3] += cy * grad[a].y;
                if (reference) {
                    rq.x += reference->coeffs[dm.u_dof(nodes[a], 0)] * val[a];
                    rq.y += reference->coeffs[dm.u_dof(nodes[a], 1)] * val[a];
                }
            }
            const double wt = q.w * jac;
            l2 += wt * (uq.x * uq.x + uq.y * uq.y);
            h1 += wt * (gu[0] * gu[0] + gu[1] * gu[1] + gu[2] * gu[2] + gu[3] * gu[3]);
            const double d = gu[0] + gu[3];
            div2 += wt * d * d;
            if (reference) {
                const double ex = uq.x - rq.x, ey = uq.y - rq.y;
                err += wt * (ex * ex + ey * ey);
            }
        }
    }
    Norms n;
    n.l2 = std::sqrt(l2);
    n.h1_semi = std::sqrt(h1);
    n.div_l2 = std::sqrt(div2);
    if (reference) n.l2_error = std::sqrt(err);
    return n;
}

double l2_distance(const Field& a, const Field& b) {
    if (a.dofmap != b.dofmap) throw std::invalid_argument("l2_distance: dofmap mismatch");
    Field diff = a;
    for (std::size_t i = 0; i < diff.coeffs.size(); ++i) diff.coeffs[i] -= b.coeffs[i];
    return compute_norms(diff).l2;
}

void shift_to_zero_mean(Field& p) {
    const DofMap& dm = *p.dofmap;
    if (static_cast<int>(p.coeffs.size()) != dm.n_p)
        throw std::invalid_argument("shift_to_zero_mean: not a pressure field");
    const Mesh& mesh = *dm.mesh;
    double mean = 0.0;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const auto& tri = mesh.triangles[t];
        const double area = triangle_signed_area(mesh, t);
        mean += area / 3.0 * (p.coeffs[tri[0]] + p.coeffs[tri[1]] + p.coeffs[tri[2]]);
    }
    for (auto& c : p.coeffs) c -= mean;  // domain area is 1
}

}  // namespace cdanse
