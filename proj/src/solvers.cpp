#include "cdanse/solvers.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace cdanse {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Euclidean norm of (A x - b) over unconstrained dofs.
double system_residual(const AssembledSystem& sys, std::span<const double> x) {
    const auto ax = sys.matrix.multiply(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) {
        if (sys.bcs->is_constrained[i]) continue;
        const double r = ax[i] - sys.rhs[i];
        acc += r * r;
    }
    return std::sqrt(acc);
}

StepResult solve_system(const AssembledSystem& sys, const ProblemContext& ctx,
                        std::span<const double> previous_state) {
    StepResult out;
    out.algebraic_residual = system_residual(sys, previous_state);
    const auto x = linalg::lu_solve(sys.matrix, sys.rhs);
    const DofMap& dm = *ctx.dofmap;
    out.u = {&dm, std::vector<double>(x.begin(), x.begin() + dm.n_u)};
    out.p = {&dm, std::vector<double>(x.begin() + dm.n_u, x.end())};
    shift_to_zero_mean(out.p);
    return out;
}

std::vector<double> full_state(const ProblemContext& ctx, const Field& u, const Field* p) {
    std::vector<double> x(ctx.dim(), 0.0);
    std::copy(u.coeffs.begin(), u.coeffs.end(), x.begin());
    if (p) std::copy(p->coeffs.begin(), p->coeffs.end(), x.begin() + ctx.dofmap->n_u);
    return x;
}

}  // namespace

void SolverConfig::validate() const {
    if (nu <= 0.0) throw std::invalid_argument("SolverConfig: nu must be positive");
    if (mu < 0.0) throw std::invalid_argument("SolverConfig: mu must be nonnegative");
    if (gamma_gd < 0.0) throw std::invalid_argument("SolverConfig: gamma_gd must be nonnegative");
    if (!(tol_residual > 0.0)) throw std::invalid_argument("SolverConfig: tol_residual must be positive");
    if (!(tol_residual < switch_tol && switch_tol < blowup_threshold))
        throw std::invalid_argument("SolverConfig: need tol_residual < switch_tol < blowup_threshold");
    if (max_iter < 1) throw std::invalid_argument("SolverConfig: max_iter must be >= 1");
}

std::string to_string(TerminalStatus s) {
    switch (s) {
        case TerminalStatus::Converged: return "Converged";
        case TerminalStatus::MaxIter: return "MaxIter";
        case TerminalStatus::Diverged: return "Diverged";
    }
    return "Unknown";
}

ProblemContext ProblemContext::build(const Mesh& mesh, const DofMap& dm, SolverConfig config,
                                     const std::function<Vec2(Vec2)>& forcing,
                                     const ObservationSet* obs) {
    config.validate();

    ProblemContext ctx;
    ctx.mesh = &mesh;
    ctx.dofmap = &dm;
    ctx.config = config;

    ctx.constant_triplets = viscous_graddiv_triplets(dm, config.nu, config.gamma_gd);
    const auto coupling = divergence_coupling_triplets(dm);
    ctx.constant_triplets.reserve(ctx.constant_triplets.size() + 2 * coupling.size());
    for (const auto& t : coupling) {
        ctx.constant_triplets.push_back(t);                         // (div u, q)
        ctx.constant_triplets.push_back({t.col, t.row, -t.value});  // -(p, div v)
    }

    ctx.base_rhs.assign(dm.n_u + dm.n_p, 0.0);
    if (forcing) {
        const auto f = assemble_forcing(dm, forcing);
        std::copy(f.begin(), f.end(), ctx.base_rhs.begin());
    }

    ctx.bcs = lid_boundary_conditions(dm, config.lid_value);

    if (obs) {
        ctx.obs = obs;
        ctx.nudging = assemble_nudging(dm, obs->grid, obs->obs_vertices, config.mu, config.ih_mode);
        ctx.nudging_rhs = ctx.nudging.rhs(obs->noisy_values, dm.n_u);
    }
    return ctx;
}

Field ProblemContext::initial_iterate() const {
    Field u = Field::zero_velocity(*dofmap);
    for (int d = 0; d < dofmap->n_u; ++d)
        if (bcs.is_constrained[d]) u.coeffs[d] = bcs.value[d];
    return u;
}

AssembledSystem assemble_picard_system(const Field& u_k, const ProblemContext& ctx) {
    const DofMap& dm = *ctx.dofmap;
    auto triplets = ctx.constant_triplets;
    const auto conv = convection_triplets(dm, u_k);
    triplets.insert(triplets.end(), conv.begin(), conv.end());
    return apply_dirichlet(ctx.dim(), triplets, ctx.base_rhs, ctx.bcs);
}

AssembledSystem assemble_newton_system(const Field& u_k, const ProblemContext& ctx) {
    const DofMap& dm = *ctx.dofmap;
    auto triplets = ctx.constant_triplets;
    const auto conv = convection_triplets(dm, u_k);
    triplets.insert(triplets.end(), conv.begin(), conv.end());
    auto [lin, lin_rhs] = newton_linearization_triplets(dm, u_k);
    triplets.insert(triplets.end(), lin.begin(), lin.end());
    auto rhs = ctx.base_rhs;
    for (int d = 0; d < dm.n_u; ++d) rhs[d] += lin_rhs[d];
    return apply_dirichlet(ctx.dim(), triplets, std::move(rhs), ctx.bcs);
}

AssembledSystem assemble_cda_picard_system(const Field& u_k, const ObservationSet& obs,
                                           const ProblemContext& ctx) {
    if (ctx.obs != &obs)
        throw std::invalid_argument("assemble_cda_picard_system: observation set not bound to this context");
    const DofMap& dm = *ctx.dofmap;
    auto triplets = ctx.constant_triplets;
    const auto conv = convection_triplets(dm, u_k);
    triplets.insert(triplets.end(), conv.begin(), conv.end());
    triplets.insert(triplets.end(), ctx.nudging.triplets.begin(), ctx.nudging.triplets.end());
    auto rhs = ctx.base_rhs;
    for (int d = 0; d < dm.n_u; ++d) rhs[d] += ctx.nudging_rhs.empty() ? 0.0 : ctx.nudging_rhs[d];
    return apply_dirichlet(ctx.dim(), triplets, std::move(rhs), ctx.bcs);
}

StepResult picard_step(const Field& u_k, const ProblemContext& ctx) {
    const auto sys = assemble_picard_system(u_k, ctx);
    return solve_system(sys, ctx, full_state(ctx, u_k, nullptr));
}

StepResult newton_step(const Field& u_k, const ProblemContext& ctx) {
    const auto sys = assemble_newton_system(u_k, ctx);
    return solve_system(sys, ctx, full_state(ctx, u_k, nullptr));
}

StepResult cda_picard_step(const Field& u_k, const ObservationSet& obs, const ProblemContext& ctx) {
    const auto sys = assemble_cda_picard_system(u_k, obs, ctx);
    return solve_system(sys, ctx, full_state(ctx, u_k, nullptr));
}

std::pair<Field, IterationHistory> iterate(const Stepper& stepper, Field u0,
                                           const ProblemContext& ctx,
                                           const Field* reference, const IterateOptions& opts) {
    IterationHistory history;
    Field u = std::move(u0);

    for (int k = 1; k <= opts.max_iter; ++k) {
        const auto t0 = Clock::now();
        StepResult step;
        try {
            step = stepper(u);
        } catch (const linalg::SingularMatrixError& e) {
            history.status = TerminalStatus::Diverged;
            throw SolverError(std::string("linear solve failed at iterate ") +
                                  std::to_string(opts.k_offset + k) + ": " + e.what(),
                              opts.k_offset + k);
        }

        IterationRecord rec;
        rec.k = opts.k_offset + k;
        rec.l2_residual = l2_distance(step.u, u);
        if (reference) rec.l2_error = l2_distance(step.u, *reference);
        rec.h1_norm = compute_norms(step.u).h1_semi;
        rec.algebraic_residual = step.algebraic_residual;
        rec.wall_time_s = seconds_since(t0);
        rec.phase = opts.phase;
        history.records.push_back(std::move(rec));

        u = std::move(step.u);

        if (history.records.back().h1_norm > ctx.config.blowup_threshold ||
            !std::isfinite(history.records.back().h1_norm)) {
            history.status = TerminalStatus::Diverged;
            return {std::move(u), std::move(history)};
        }
        if (history.records.back().l2_residual < opts.tol) {
            history.status = TerminalStatus::Converged;
            return {std::move(u), std::move(history)};
        }
    }
    history.status = TerminalStatus::MaxIter;
    return {std::move(u), std::move(history)};
}

std::pair<Field, IterationHistory> run_picard(const ProblemContext& ctx, const Field* reference) {
    IterateOptions opts{ctx.config.tol_residual, ctx.config.max_iter, "picard", 0};
    return iterate([&ctx](const Field& u) { return picard_step(u, ctx); },
                   ctx.initial_iterate(), ctx, reference, opts);
}

std::pair<Field, IterationHistory> run_newton(const ProblemContext& ctx, const Field* reference) {
    IterateOptions opts{ctx.config.tol_residual, ctx.config.max_iter, "newton", 0};
    return iterate([&ctx](const Field& u) { return newton_step(u, ctx); },
                   ctx.initial_iterate(), ctx, reference, opts);
}

std::pair<Field, IterationHistory> run_cda_picard(const ProblemContext& ctx,
                                                  const ObservationSet& obs,
                                                  const Field* reference) {
    IterateOptions opts{ctx.config.tol_residual, ctx.config.max_iter, "cda_picard", 0};
    return iterate([&ctx, &obs](const Field& u) { return cda_picard_step(u, obs, ctx); },
                   ctx.initial_iterate(), ctx, reference, opts);
}

std::pair<Field, IterationHistory> hybrid_cda_newton(const ProblemContext& ctx,
                                                     const ObservationSet& obs,
                                                     const Field* reference) {
    IterateOptions phase1{ctx.config.switch_tol, ctx.config.max_iter, "cda_picard", 0};
    auto [u1, h1] = iterate([&ctx, &obs](const Field& u) { return cda_picard_step(u, obs, ctx); },
                            ctx.initial_iterate(), ctx, reference, phase1);
    if (h1.status != TerminalStatus::Converged) return {std::move(u1), std::move(h1)};

    IterateOptions phase2{ctx.config.tol_residual, ctx.config.max_iter, "newton",
                          static_cast<int>(h1.records.size())};
    auto [u2, h2] = iterate([&ctx](const Field& u) { return newton_step(u, ctx); },
                            std::move(u1), ctx, reference, phase2);

    IterationHistory combined = std::move(h1);
    combined.records.insert(combined.records.end(), h2.records.begin(), h2.records.end());
    combined.status = h2.status;
    return {std::move(u2), std::move(combined)};
}

ReferenceResult compute_reference_detailed(const Mesh& mesh, const DofMap& dm, double nu_target,
                                           const SolverConfig& base_config) {
    if (nu_target <= 0.0) throw std::invalid_argument("compute_reference: nu_target must be positive");

    const double re_target = 1.0 / nu_target;
    std::vector<double> ladder;
    for (double re : {100.0, 500.0, 1000.0, 3000.0, 5000.0, 10000.0})
        if (re < re_target) ladder.push_back(re);
    ladder.push_back(re_target);

    Field u;
    double final_residual = 0.0;
    bool have_u = false;
    for (double re : ladder) {
        SolverConfig cfg = base_config;
        cfg.nu = 1.0 / re;
        cfg.mu = 0.0;
        cfg.tol_residual = 1e-10;
        const ProblemContext ctx = ProblemContext::build(mesh, dm, cfg);
        if (!have_u) {
            u = ctx.initial_iterate();
            have_u = true;
        }

        // Picard toward the switch tolerance; a capped MaxIter is acceptable
        // since the warm start is usually already inside Newton's basin.
        IterateOptions picard_opts{cfg.switch_tol, 100, "picard", 0};
        auto [u_p, h_p] = iterate([&ctx](const Field& v) { return picard_step(v, ctx); },
                                  std::move(u), ctx, nullptr, picard_opts);
        if (h_p.status == TerminalStatus::Diverged)
            throw ReferenceError("reference continuation: Picard diverged at Re=" +
                                 std::to_string(re));

        IterateOptions newton_opts{cfg.tol_residual, 50, "newton", 0};
        auto [u_n, h_n] = iterate([&ctx](const Field& v) { return newton_step(v, ctx); },
                                  std::move(u_p), ctx, nullptr, newton_opts);
        if (h_n.status != TerminalStatus::Converged)
            throw ReferenceError("reference continuation: Newton failed at Re=" +
                                 std::to_string(re) + " (" + to_string(h_n.status) + ")");
        u = std::move(u_n);
        final_residual = h_n.records.back().l2_residual;
    }
    return {std::move(u), final_residual};
}

Field compute_reference(const Mesh& mesh, const DofMap& dm, double nu_target,
                        const SolverConfig& base_config) {
    return compute_reference_detailed(mesh, dm, nu_target, base_config).u;
}

}  // namespace cdanse
