#pragma once

#include <optional>
#include <string>

#include "cdanse/observations.hpp"
#include "cdanse/solvers.hpp"

namespace cdanse::diag {

class DiagnosticError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Geometric mean of residual_{k+1}/residual_k over the final `window` ratios,
/// ignoring entries below 100x machine epsilon.
double contraction_rate(const IterationHistory& history, int window = 10);

/// Arithmetic consequences of the convergence theory, from user-supplied
/// estimates of the interpolation constant C_I and of K1 = max |grad u|.
struct TheoryBounds {
    double K1_estimate = 0.0;
    double C_I_user = 1.0;
    double nu = 0.0;
    double mu = 0.0;
    double H = 0.0;
    double gamma = 0.0;               // (1/K1) min(nu/(C_I^2 H^2), mu)
    double predicted_rate = 0.0;      // sqrt(2/gamma)
    double lambda_hat = 0.0;          // min(nu/(4 C_I^2 H^2), mu/2)
    double lambda_bar = 0.0;          // min(nu/(C_I^2 H^2), mu/2)
    bool mu_above_2K1 = false;
    bool H_below_clean_limit = false;  // H < sqrt(nu/(2 K1)) / C_I
    bool lambda_bar_above_2 = false;
    bool mu_above_4K1sq = false;
    bool mu_below_nu_over_CIH2 = false;
};

TheoryBounds theory_report(const SolverConfig& config, double H, double K1_estimate,
                           double C_I_user = 1.0);

/// max over assembly quadrature points of the Frobenius norm of grad u.
double estimate_K1(const Field& u);

struct RunSummary {
    std::string status;
    int iterations = 0;
    double final_residual = 0.0;
    double min_l2_error = -1.0;       // < 0 when no reference was tracked
    double contraction = -1.0;        // < 0 when not measurable
    double noise_interpolant = -1.0;  // ||I_H eps||, < 0 without observations
    double error_to_noise = -1.0;     // min error / ||I_H eps||, snr > 0 only
};

RunSummary summarize(const IterationHistory& history, const ObservationSet* obs = nullptr,
                     int contraction_window = 10);

enum class ExportFormat { CSV, JSON };

/// CSV columns exactly: k,l2_residual,l2_error,h1_norm,wall_time_s,phase.
/// JSON mirrors the records plus the resolved config and the run summary.
void export_history(const IterationHistory& history, const std::string& path,
                    ExportFormat format, const std::string& config_json = "{}",
                    const RunSummary* summary = nullptr);

std::string history_to_csv(const IterationHistory& history);
std::string history_to_json(const IterationHistory& history, const std::string& config_json,
                            const RunSummary* summary);
IterationHistory history_from_json(const std::string& text);

}  // namespace cdanse::diag
