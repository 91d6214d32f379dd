#include <doctest.h>

#include <cmath>

#include "cdanse/diagnostics.hpp"

using namespace cdanse;
using namespace cdanse::diag;

namespace {

IterationHistory geometric_history(double r0, double ratio, int count) {
    IterationHistory h;
    double r = r0;
    for (int k = 1; k <= count; ++k) {
        IterationRecord rec;
        rec.k = k;
        rec.l2_residual = r;
        rec.h1_norm = 1.0;
        rec.wall_time_s = 0.001 * k;
        rec.phase = "picard";
        h.records.push_back(rec);
        r *= ratio;
    }
    return h;
}

}  // namespace

TEST_CASE("contraction rate recovers an exact geometric ratio") {
    for (double ratio : {0.5, 0.9, 0.05}) {
        const IterationHistory h = geometric_history(1.0, ratio, 15);
        CHECK(contraction_rate(h, 10) == doctest::Approx(ratio).epsilon(1e-12));
        CHECK(contraction_rate(h, 3) == doctest::Approx(ratio).epsilon(1e-12));
    }
}

TEST_CASE("contraction rate uses only the tail window") {
    IterationHistory h = geometric_history(1.0, 0.9, 5);   // slow start
    IterationHistory tail = geometric_history(0.9 * 0.9 * 0.9 * 0.9, 0.3, 6);
    for (auto& rec : tail.records) h.records.push_back(rec);
    CHECK(contraction_rate(h, 5) == doctest::Approx(0.3).epsilon(1e-10));
}

TEST_CASE("contraction rate rejects insufficient or degenerate data") {
    CHECK_THROWS_AS(contraction_rate(geometric_history(1.0, 0.5, 3), 10), DiagnosticError);
    CHECK_THROWS_AS(contraction_rate(geometric_history(1.0, 0.5, 12), 1), DiagnosticError);
    // residuals at machine-noise level are ignored
    const IterationHistory h = geometric_history(1e-18, 0.5, 20);
    CHECK_THROWS_AS(contraction_rate(h, 10), DiagnosticError);
}

TEST_CASE("theory report arithmetic") {
    SolverConfig c;
    c.nu = 1e-3;
    c.mu = 40.0;
    const double H = 0.1, K1 = 8.0, CI = 0.5;
    const TheoryBounds b = theory_report(c, H, K1, CI);

    const double ci2h2 = CI * CI * H * H;  // 2.5e-3
    CHECK(b.gamma == doctest::Approx(std::min(c.nu / ci2h2, c.mu) / K1).epsilon(1e-14));
    CHECK(b.predicted_rate == doctest::Approx(std::sqrt(2.0 / b.gamma)).epsilon(1e-14));
    CHECK(b.lambda_hat == doctest::Approx(std::min(c.nu / (4.0 * ci2h2), c.mu / 2.0)).epsilon(1e-14));
    CHECK(b.lambda_bar == doctest::Approx(std::min(c.nu / ci2h2, c.mu / 2.0)).epsilon(1e-14));
    CHECK(b.mu_above_2K1 == (c.mu > 2.0 * K1));
    CHECK(b.H_below_clean_limit == (H < std::sqrt(c.nu / (2.0 * K1)) / CI));
    CHECK(b.lambda_bar_above_2 == (b.lambda_bar > 2.0));
    CHECK(b.mu_above_4K1sq == (c.mu >= 4.0 * K1 * K1));
    CHECK(b.mu_below_nu_over_CIH2 == (c.mu <= c.nu / ci2h2));
    CHECK_THROWS_AS(theory_report(c, -1.0, K1, CI), std::invalid_argument);
}

TEST_CASE("csv export has the pinned header and full-precision values") {
    IterationHistory h = geometric_history(0.125, 0.5, 2);
    h.records[0].l2_error = 1.0 / 3.0;
    const std::string csv = history_to_csv(h);
    const std::string header = csv.substr(0, csv.find('\n'));
    CHECK(header == "k,l2_residual,l2_error,h1_norm,wall_time_s,phase");
    CHECK(csv.find("0.33333333333333331") != std::string::npos);
    // missing error column stays empty
    CHECK(csv.find("2,0.0625,,1,") != std::string::npos);
}

TEST_CASE("json history round trip preserves every record") {
    IterationHistory h = geometric_history(1.0, 0.25, 6);
    h.status = TerminalStatus::Converged;
    h.records[3].l2_error = 1e-5;
    h.records[3].algebraic_residual = 2e-4;
    const RunSummary s = summarize(h);
    const IterationHistory back = history_from_json(history_to_json(h, "{\"n\": 8}", &s));
    CHECK(back.status == h.status);
    REQUIRE(back.records.size() == h.records.size());
    for (std::size_t i = 0; i < h.records.size(); ++i) {
        CHECK(back.records[i].k == h.records[i].k);
        CHECK(back.records[i].l2_residual == h.records[i].l2_residual);
        CHECK(back.records[i].l2_error == h.records[i].l2_error);
        CHECK(back.records[i].h1_norm == h.records[i].h1_norm);
        CHECK(back.records[i].wall_time_s == h.records[i].wall_time_s);
        CHECK(back.records[i].algebraic_residual == h.records[i].algebraic_residual);
        CHECK(back.records[i].phase == h.records[i].phase);
    }
}

TEST_CASE("summarize reports the run at a glance") {
    IterationHistory h = geometric_history(1.0, 0.5, 12);
    h.status = TerminalStatus::Converged;
    h.records[7].l2_error = 3e-4;
    h.records[9].l2_error = 1e-4;
    h.records[11].l2_error = 2e-4;
    const RunSummary s = summarize(h);
    CHECK(s.status == "Converged");
    CHECK(s.iterations == 12);
    CHECK(s.final_residual == h.records.back().l2_residual);
    CHECK(s.min_l2_error == 1e-4);
    CHECK(s.contraction == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.noise_interpolant < 0.0);  // no observations supplied
}
