#include <doctest.h>

#include <cmath>

#include "cdanse/solvers.hpp"

using namespace cdanse;

namespace {

SolverConfig cavity_config(double Re) {
    SolverConfig c;
    c.nu = 1.0 / Re;
    return c;
}

ObservationSet clean_observations(const Mesh& mesh, const Field& reference, int N) {
    const CoarseGrid grid = CoarseGrid::make(N);
    const auto verts = locate_observation_vertices(mesh, grid);
    return make_observation_set(reference, grid, verts, 0.0, 1.0, 1);
}

}  // namespace

TEST_CASE("solver config validation") {
    SolverConfig c = cavity_config(100.0);
    CHECK_NOTHROW(c.validate());
    c.mu = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = cavity_config(100.0);
    c.max_iter = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("mu = 0 nudged system is bit-identical to the picard system") {
    const Mesh mesh = uniform_cavity_mesh(8);
    const DofMap dm = DofMap::build(mesh);
    SolverConfig c = cavity_config(500.0);
    c.mu = 0.0;

    // reference only matters through the observed values; any field works here
    Field some = Field::zero_velocity(dm);
    for (std::size_t i = 0; i < some.coeffs.size(); ++i)
        some.coeffs[i] = std::sin(0.37 * static_cast<double>(i));
    const ObservationSet obs = clean_observations(mesh, some, 4);

    const ProblemContext plain = ProblemContext::build(mesh, dm, c);
    const ProblemContext nudged = ProblemContext::build(mesh, dm, c, {}, &obs);
    const Field u_k = plain.initial_iterate();

    const AssembledSystem a = assemble_picard_system(u_k, plain);
    const AssembledSystem b = assemble_cda_picard_system(u_k, obs, nudged);
    REQUIRE(a.matrix.same_pattern(b.matrix));
    REQUIRE(a.matrix.values().size() == b.matrix.values().size());
    for (std::size_t i = 0; i < a.matrix.values().size(); ++i)
        CHECK(a.matrix.values()[i] == b.matrix.values()[i]);
    REQUIRE(a.rhs.size() == b.rhs.size());
    for (std::size_t i = 0; i < a.rhs.size(); ++i) CHECK(a.rhs[i] == b.rhs[i]);
}

TEST_CASE("picard converges on the moderate-Re cavity") {
    const Mesh mesh = uniform_cavity_mesh(16);
    const DofMap dm = DofMap::build(mesh);
    const ProblemContext ctx = ProblemContext::build(mesh, dm, cavity_config(100.0));
    const auto [u, history] = run_picard(ctx);

    CHECK(history.status == TerminalStatus::Converged);
    CHECK(history.records.size() < 30);
    CHECK(history.records.back().l2_residual < 1e-8);
    for (std::size_t i = 0; i < history.records.size(); ++i) {
        CHECK(history.records[i].k == static_cast<int>(i) + 1);
        CHECK(history.records[i].phase == "picard");
        CHECK(history.records[i].wall_time_s > 0.0);
    }

    // converged iterate keeps the lid boundary values
    const auto& bcs = ctx.bcs;
    for (int i = 0; i < dm.n_u; ++i)
        if (bcs.is_constrained[i]) CHECK(u.coeffs[i] == doctest::Approx(bcs.value[i]).epsilon(1e-12));
}

TEST_CASE("newton converges fast at moderate Re with superlinear tail") {
    const Mesh mesh = uniform_cavity_mesh(16);
    const DofMap dm = DofMap::build(mesh);
    const ProblemContext ctx = ProblemContext::build(mesh, dm, cavity_config(100.0));
    const auto [u, history] = run_newton(ctx);

    CHECK(history.status == TerminalStatus::Converged);
    CHECK(history.records.size() <= 10);
    // quadratic-type decay: the last pre-convergence ratio beats the first
    const auto& r = history.records;
    REQUIRE(r.size() >= 3);
    const double early = r[1].l2_residual / r[0].l2_residual;
    const double late = r.back().l2_residual / r[r.size() - 2].l2_residual;
    CHECK(late < 0.1 * early);
}

TEST_CASE("picard and newton agree on the converged velocity") {
    const Mesh mesh = uniform_cavity_mesh(12);
    const DofMap dm = DofMap::build(mesh);
    const ProblemContext ctx = ProblemContext::build(mesh, dm, cavity_config(100.0));
    const auto [up, hp] = run_picard(ctx);
    const auto [un, hn] = run_newton(ctx);
    REQUIRE(hp.status == TerminalStatus::Converged);
    REQUIRE(hn.status == TerminalStatus::Converged);
    CHECK(l2_distance(up, un) < 1e-6);
}

TEST_CASE("blowup threshold triggers Diverged") {
    const Mesh mesh = uniform_cavity_mesh(8);
    const DofMap dm = DofMap::build(mesh);
    SolverConfig c = cavity_config(100.0);
    c.blowup_threshold = 1e-3;  // any nontrivial iterate exceeds this
    c.switch_tol = 1e-4;        // keep tol < switch < blowup ordering valid
    const ProblemContext ctx = ProblemContext::build(mesh, dm, c);
    const auto [u, history] = run_picard(ctx);
    CHECK(history.status == TerminalStatus::Diverged);
    CHECK(history.records.size() == 1);
}

TEST_CASE("max_iter is respected") {
    const Mesh mesh = uniform_cavity_mesh(8);
    const DofMap dm = DofMap::build(mesh);
    SolverConfig c = cavity_config(100.0);
    c.max_iter = 3;
    c.tol_residual = 1e-16;
    const ProblemContext ctx = ProblemContext::build(mesh, dm, c);
    const auto [u, history] = run_picard(ctx);
    CHECK(history.status == TerminalStatus::MaxIter);
    CHECK(history.records.size() == 3);
}

TEST_CASE("reference solver reaches a tight tolerance and tracks errors") {
    const Mesh mesh = uniform_cavity_mesh(12);
    const DofMap dm = DofMap::build(mesh);
    const SolverConfig c = cavity_config(500.0);
    const ReferenceResult ref = compute_reference_detailed(mesh, dm, c.nu, c);
    CHECK(ref.final_residual < 1e-10);

    // a plain picard run tracked against the reference converges to it
    const ProblemContext ctx = ProblemContext::build(mesh, dm, c);
    const auto [u, history] = run_picard(ctx, &ref.u);
    REQUIRE(history.status == TerminalStatus::Converged);
    CHECK(history.records.back().l2_error < 1e-7);
    for (const auto& rec : history.records) CHECK(rec.l2_error >= 0.0);
}

TEST_CASE("clean-data nudging converges and tracks the reference closely") {
    const Mesh mesh = uniform_cavity_mesh(16);
    const DofMap dm = DofMap::build(mesh);
    SolverConfig c = cavity_config(1000.0);
    c.mu = 1e4;
    const Field ref = compute_reference(mesh, dm, c.nu, c);
    const ObservationSet obs = clean_observations(mesh, ref, 8);
    const ProblemContext ctx = ProblemContext::build(mesh, dm, c, {}, &obs);

    const auto [u, history] = run_cda_picard(ctx, obs, &ref);
    REQUIRE(history.status == TerminalStatus::Converged);
    CHECK(history.records.back().l2_error < 1e-6);
    for (const auto& rec : history.records) CHECK(rec.phase == "cda_picard");
}

TEST_CASE("hybrid switches from cda_picard to newton and converges") {
    const Mesh mesh = uniform_cavity_mesh(16);
    const DofMap dm = DofMap::build(mesh);
    SolverConfig c = cavity_config(1000.0);
    c.mu = 1e4;
    const Field ref = compute_reference(mesh, dm, c.nu, c);
    const ObservationSet obs = clean_observations(mesh, ref, 8);
    const ProblemContext ctx = ProblemContext::build(mesh, dm, c, {}, &obs);

    const auto [u, history] = hybrid_cda_newton(ctx, obs, &ref);
    REQUIRE(history.status == TerminalStatus::Converged);
    bool saw_cda = false, saw_newton = false;
    int last_k = 0;
    for (const auto& rec : history.records) {
        CHECK(rec.k == last_k + 1);  // iteration counter continues across phases
        last_k = rec.k;
        if (rec.phase == "cda_picard") {
            CHECK_FALSE(saw_newton);  // no interleaving
            saw_cda = true;
        } else {
            CHECK(rec.phase == "newton");
            saw_newton = true;
        }
    }
    CHECK(saw_cda);
    CHECK(saw_newton);
    CHECK(history.records.back().l2_residual < 1e-8);
    CHECK(history.records.back().l2_error < 1e-8);
}
