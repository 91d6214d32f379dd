#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cdanse/linalg.hpp"
#include "cdanse/mesh.hpp"
#include "cdanse/quadrature.hpp"

namespace cdanse {

/// Taylor-Hood layout: quadratic velocity (vertex + edge-midpoint nodes, two
/// components, interleaved) followed by linear pressure (vertex nodes).
/// Velocity dof of node i, component c is 2*i + c; pressure dof of vertex v
/// is n_u + v.
struct DofMap {
    const Mesh* mesh = nullptr;
    std::vector<std::array<int, 2>> edges;           // sorted vertex pairs
    std::vector<std::array<int, 3>> triangle_edges;  // per triangle: edge ids of (v0v1, v1v2, v2v0)
    std::vector<Vec2> node_coords;                   // vertices then edge midpoints
    int n_u = 0;
    int n_p = 0;

    static DofMap build(const Mesh& mesh);

    int n_vertices() const { return static_cast<int>(mesh->vertices.size()); }
    int n_edges() const { return static_cast<int>(edges.size()); }
    int velocity_nodes() const { return n_vertices() + n_edges(); }
    int u_dof(int node, int comp) const { return 2 * node + comp; }
    int p_dof(int vertex) const { return n_u + vertex; }

    /// Global velocity node ids of a triangle's six P2 nodes
    /// (v0, v1, v2, m01, m12, m20).
    std::array<int, 6> element_nodes(int t) const;
};

/// Coefficient vector over one block of a DofMap (velocity: length n_u,
/// pressure: length n_p).
struct Field {
    const DofMap* dofmap = nullptr;
    std::vector<double> coeffs;

    static Field zero_velocity(const DofMap& dm) { return {&dm, std::vector<double>(dm.n_u, 0.0)}; }
    static Field zero_pressure(const DofMap& dm) { return {&dm, std::vector<double>(dm.n_p, 0.0)}; }

    bool is_velocity() const { return dofmap && static_cast<int>(coeffs.size()) == dofmap->n_u; }
};

/// Nodal interpolation of an analytic velocity (x,y) -> (ux,uy).
Field interpolate_velocity(const DofMap& dm, const std::function<Vec2(Vec2)>& f);
/// Nodal interpolation of an analytic pressure at the vertices.
Field interpolate_pressure(const DofMap& dm, const std::function<double(Vec2)>& f);

/// Evaluate a velocity field at a mesh vertex (P2 is nodal there).
Vec2 velocity_at_vertex(const Field& u, int vertex);

// ---- operator assembly (velocity block unless stated otherwise) ----

std::vector<linalg::Triplet> viscous_graddiv_triplets(const DofMap& dm, double nu, double gamma_gd);
linalg::SparseMatrix assemble_viscous_graddiv(const DofMap& dm, double nu, double gamma_gd);

/// Skew-symmetrized convection b*(w, ., .): matrix C with v^T C z = b*(w,z,v).
std::vector<linalg::Triplet> convection_triplets(const DofMap& dm, const Field& w);
linalg::SparseMatrix assemble_convection(const DofMap& dm, const Field& w);

/// Extra Newton terms: matrix discretizing b*(., w, v) and the rhs vector
/// discretizing b*(w, w, v).
std::pair<std::vector<linalg::Triplet>, std::vector<double>>
newton_linearization_triplets(const DofMap& dm, const Field& w);
std::pair<linalg::SparseMatrix, std::vector<double>>
assemble_newton_linearization(const DofMap& dm, const Field& w);

/// Divergence coupling B with (B u)_q = (div u_h, q_h). Stored in full-system
/// indexing: rows are pressure dofs, columns velocity dofs.
std::vector<linalg::Triplet> divergence_coupling_triplets(const DofMap& dm);
linalg::SparseMatrix assemble_divergence_coupling(const DofMap& dm);

/// Velocity mass matrix (for L2 norms of coefficient differences).
std::vector<linalg::Triplet> velocity_mass_triplets(const DofMap& dm);

/// Forcing vector (f, v) over the velocity block.
std::vector<double> assemble_forcing(const DofMap& dm, const std::function<Vec2(Vec2)>& f);

// ---- coarse interpolation and nudging ----

enum class IhMode { PointValue, CellAverage };

using CellValues = std::vector<Vec2>;  // one value per coarse cell, row-major

/// I_H u: PointValue holds the value at the cell's observation vertex constant
/// on the cell; CellAverage is the piecewise-constant L2 projection (requires
/// n divisible by N so cells are unions of fine triangles).
CellValues interpolate_IH(const Field& u, const CoarseGrid& grid, IhMode mode,
                          std::span<const int> obs_vertices);

/// mu * sum_cells |cell| (I_H u)_c . (I_H v)_c on the velocity block, plus the
/// map from observed cell values to the rhs vector mu (I_H d, I_H v).
struct NudgingOperator {
    double mu = 0.0;
    std::vector<linalg::Triplet> triplets;
    // sparse representation of |cell| * (I_H phi_i)_c per cell and component:
    // list of (u_dof, weight) such that rhs_i = mu * sum weight * d
    struct CellLoad {
        int cell;
        int comp;
        std::vector<std::pair<int, double>> dofs;  // integral of phi_i over the cell
    };
    std::vector<CellLoad> loads;
    double cell_area = 0.0;

    std::vector<double> rhs(const CellValues& observed, int n_u) const;
};

NudgingOperator assemble_nudging(const DofMap& dm, const CoarseGrid& grid,
                                 std::span<const int> obs_vertices, double mu, IhMode mode);

// ---- boundary conditions and full systems ----

struct BoundaryConditions {
    std::vector<char> is_constrained;  // size n_u + n_p
    std::vector<double> value;         // boundary value per constrained dof
    int pinned_pressure_dof = -1;
};

/// Velocity dofs on Lid-tagged geometry (vertices and lid-edge midpoints) get
/// lid_value, all other boundary velocity dofs get zero, and the first
/// pressure dof is pinned to zero.
BoundaryConditions lid_boundary_conditions(const DofMap& dm, Vec2 lid_value);

struct AssembledSystem {
    linalg::SparseMatrix matrix;  // (n_u + n_p) square
    std::vector<double> rhs;
    const BoundaryConditions* bcs = nullptr;
};

/// Row replacement with column elimination: constrained rows become identity
/// rows carrying the boundary value; columns are folded into the rhs.
AssembledSystem apply_dirichlet(int dim, std::span<const linalg::Triplet> triplets,
                                std::vector<double> rhs, const BoundaryConditions& bcs);

// ---- norms ----

struct Norms {
    double l2 = 0.0;
    double h1_semi = 0.0;
    double div_l2 = 0.0;
    std::optional<double> l2_error;
};

Norms compute_norms(const Field& u, const Field* reference = nullptr);

/// Quadrature-exact L2 distance between two velocity fields on one dofmap.
double l2_distance(const Field& a, const Field& b);

/// Shift a pressure field to zero mean over the unit square.
void shift_to_zero_mean(Field& p);

// ---- element helpers shared with tests ----

struct ElementGeometry {
    std::array<Vec2, 3> verts;
    double area = 0.0;                 // signed
    std::array<Vec2, 3> grad_lambda;   // gradients of barycentric coordinates
};

ElementGeometry element_geometry(const Mesh& mesh, int t);

/// P2 basis values and gradients at reference point (x, y), node order
/// (v0, v1, v2, m01, m12, m20).
void p2_basis(const ElementGeometry& g, double x, double y,
              std::array<double, 6>& val, std::array<Vec2, 6>& grad);

/// Evaluate velocity and its gradient at a reference point of element t.
void eval_velocity(const Field& u, int t, double x, double y, Vec2& value,
                   std::array<double, 4>& grad /* ux_x, ux_y, uy_x, uy_y */);

}  // namespace cdanse
