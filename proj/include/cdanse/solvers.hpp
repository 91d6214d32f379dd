#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cdanse/fem.hpp"
#include "cdanse/observations.hpp"

namespace cdanse {

struct SolverConfig {
    double nu = 0.01;                  // 1/Re
    double mu = 0.0;                   // nudging parameter
    double gamma_gd = 1.0;             // grad-div weight
    double tol_residual = 1e-8;        // on the L2 successive-iterate difference
    int max_iter = 500;
    double blowup_threshold = 1e4;     // on the H1 seminorm of the iterate
    double switch_tol = 1e-2;          // hybrid phase-1 stopping tolerance
    IhMode ih_mode = IhMode::PointValue;
    Vec2 lid_value{1.0, 0.0};

    void validate() const;
};

enum class TerminalStatus { Converged, MaxIter, Diverged };

std::string to_string(TerminalStatus s);

struct IterationRecord {
    int k = 0;
    double l2_residual = 0.0;            // || u_{k+1} - u_k ||_L2
    double l2_error = -1.0;              // vs reference, < 0 when no reference
    double h1_norm = 0.0;                // H1 seminorm of the iterate
    double wall_time_s = 0.0;
    double algebraic_residual = -1.0;    // nonlinear system residual at the incoming iterate
    std::string phase;
};

struct IterationHistory {
    std::vector<IterationRecord> records;
    TerminalStatus status = TerminalStatus::MaxIter;
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, int iterate_index)
        : std::runtime_error(what), iterate_index(iterate_index) {}
    int iterate_index;
};

/// Assembled operators shared across the iterations of one solve.
struct ProblemContext {
    const Mesh* mesh = nullptr;
    const DofMap* dofmap = nullptr;
    SolverConfig config;

    std::vector<linalg::Triplet> constant_triplets;  // viscous + grad-div + saddle coupling
    std::vector<double> base_rhs;                    // forcing over all dofs
    BoundaryConditions bcs;

    const ObservationSet* obs = nullptr;
    NudgingOperator nudging;
    std::vector<double> nudging_rhs;  // mu (I_H (u + eps), I_H v), fixed for the run

    static ProblemContext build(const Mesh& mesh, const DofMap& dm, SolverConfig config,
                                const std::function<Vec2(Vec2)>& forcing = {},
                                const ObservationSet* obs = nullptr);

    int dim() const { return dofmap->n_u + dofmap->n_p; }

    /// Zero interior velocity lifted to the boundary values (the iterate must
    /// satisfy the lid condition).
    Field initial_iterate() const;
};

AssembledSystem assemble_picard_system(const Field& u_k, const ProblemContext& ctx);
AssembledSystem assemble_newton_system(const Field& u_k, const ProblemContext& ctx);
AssembledSystem assemble_cda_picard_system(const Field& u_k, const ObservationSet& obs,
                                           const ProblemContext& ctx);

struct StepResult {
    Field u;
    Field p;
    double algebraic_residual = -1.0;
};

StepResult picard_step(const Field& u_k, const ProblemContext& ctx);
StepResult newton_step(const Field& u_k, const ProblemContext& ctx);
StepResult cda_picard_step(const Field& u_k, const ObservationSet& obs, const ProblemContext& ctx);

using Stepper = std::function<StepResult(const Field& u_k)>;

struct IterateOptions {
    double tol = 1e-8;
    int max_iter = 500;
    std::string phase = "main";
    int k_offset = 0;
};

std::pair<Field, IterationHistory> iterate(const Stepper& stepper, Field u0,
                                           const ProblemContext& ctx,
                                           const Field* reference, const IterateOptions& opts);

// Convenience drivers; u0 defaults to the BC-lifted zero iterate.
std::pair<Field, IterationHistory> run_picard(const ProblemContext& ctx,
                                              const Field* reference = nullptr);
std::pair<Field, IterationHistory> run_newton(const ProblemContext& ctx,
                                              const Field* reference = nullptr);
std::pair<Field, IterationHistory> run_cda_picard(const ProblemContext& ctx,
                                                  const ObservationSet& obs,
                                                  const Field* reference = nullptr);

/// CDA-Picard to switch_tol, then plain Newton (no nudging) to tol_residual.
/// Phase 2 is skipped when phase 1 does not reach switch_tol.
std::pair<Field, IterationHistory> hybrid_cda_newton(const ProblemContext& ctx,
                                                     const ObservationSet& obs,
                                                     const Field* reference = nullptr);

class ReferenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ReferenceResult {
    Field u;
    double final_residual = 0.0;  // last Newton iterate difference at the target rung
};

/// Discrete NSE solution by Reynolds continuation over the ladder
/// {100, 500, 1000, 3000, 5000, 10000} clipped at the target: Picard to the
/// switch tolerance then Newton to 1e-10 per rung, warm-starting each rung.
ReferenceResult compute_reference_detailed(const Mesh& mesh, const DofMap& dm, double nu_target,
                                           const SolverConfig& base_config);
Field compute_reference(const Mesh& mesh, const DofMap& dm, double nu_target,
                        const SolverConfig& base_config);

}  // namespace cdanse
