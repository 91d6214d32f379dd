#include "cdanse/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace cdanse::diag {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

double contraction_rate(const IterationHistory& history, int window) {
    if (window < 2) throw DiagnosticError("contraction_rate: window must be >= 2");
    const double floor = 100.0 * std::numeric_limits<double>::epsilon();

    std::vector<double> usable;
    for (const auto& rec : history.records)
        if (rec.l2_residual > floor) usable.push_back(rec.l2_residual);
    if (static_cast<int>(usable.size()) < window + 1)
        throw DiagnosticError("contraction_rate: need at least window+1 usable residuals");

    double log_sum = 0.0;
    const std::size_t last = usable.size() - 1;
    for (int i = 0; i < window; ++i)
        log_sum += std::log(usable[last - i] / usable[last - i - 1]);
    return std::exp(log_sum / window);
}

TheoryBounds theory_report(const SolverConfig& config, double H, double K1_estimate,
                           double C_I_user) {
    if (H <= 0.0 || K1_estimate <= 0.0 || C_I_user <= 0.0)
        throw std::invalid_argument("theory_report: inputs must be positive");

    TheoryBounds b;
    b.K1_estimate = K1_estimate;
    b.C_I_user = C_I_user;
    b.nu = config.nu;
    b.mu = config.mu;
    b.H = H;

    const double ci2h2 = C_I_user * C_I_user * H * H;
    b.gamma = std::min(config.nu / ci2h2, config.mu) / K1_estimate;
    b.predicted_rate = std::sqrt(2.0 / b.gamma);
    b.lambda_hat = std::min(config.nu / (4.0 * ci2h2), config.mu / 2.0);
    b.lambda_bar = std::min(config.nu / ci2h2, config.mu / 2.0);

    b.mu_above_2K1 = config.mu > 2.0 * K1_estimate;
    b.H_below_clean_limit = H < std::sqrt(config.nu / (2.0 * K1_estimate)) / C_I_user;
    b.lambda_bar_above_2 = b.lambda_bar > 2.0;
    b.mu_above_4K1sq = config.mu >= 4.0 * K1_estimate * K1_estimate;
    b.mu_below_nu_over_CIH2 = config.mu <= config.nu / ci2h2;
    return b;
}

double estimate_K1(const Field& u) {
    const DofMap& dm = *u.dofmap;
    const Mesh& mesh = *dm.mesh;
    const auto rule = triangle_rule_degree5();
    double best = 0.0;
    Vec2 val;
    std::array<double, 4> grad;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        for (const QuadPoint& q : rule) {
            eval_velocity(u, t, q.x, q.y, val, grad);
            const double frob = std::sqrt(grad[0] * grad[0] + grad[1] * grad[1] +
                                          grad[2] * grad[2] + grad[3] * grad[3]);
            best = std::max(best, frob);
        }
    }
    return best;
}

RunSummary summarize(const IterationHistory& history, const ObservationSet* obs,
                     int contraction_window) {
    RunSummary s;
    s.status = to_string(history.status);
    s.iterations = static_cast<int>(history.records.size());
    if (!history.records.empty()) s.final_residual = history.records.back().l2_residual;

    double min_err = std::numeric_limits<double>::max();
    bool have_err = false;
    for (const auto& rec : history.records)
        if (rec.l2_error >= 0.0) {
            min_err = std::min(min_err, rec.l2_error);
            have_err = true;
        }
    if (have_err) s.min_l2_error = min_err;

    try {
        s.contraction = contraction_rate(history, contraction_window);
    } catch (const DiagnosticError&) {
    }

    if (obs) {
        s.noise_interpolant = noise_interpolant_norm(*obs);
        if (obs->snr > 0.0 && have_err && s.noise_interpolant > 0.0)
            s.error_to_noise = min_err / s.noise_interpolant;
    }
    return s;
}

std::string history_to_csv(const IterationHistory& history) {
    std::string out = "k,l2_residual,l2_error,h1_norm,wall_time_s,phase\n";
    for (const auto& rec : history.records) {
        out += std::to_string(rec.k);
        out += ',';
        out += fmt17(rec.l2_residual);
        out += ',';
        out += rec.l2_error >= 0.0 ? fmt17(rec.l2_error) : "";
        out += ',';
        out += fmt17(rec.h1_norm);
        out += ',';
        out += fmt17(rec.wall_time_s);
        out += ',';
        out += rec.phase;
        out += '\n';
    }
    return out;
}

namespace {

nlohmann::json record_to_json(const IterationRecord& rec) {
    nlohmann::json j;
    j["k"] = rec.k;
    j["l2_residual"] = rec.l2_residual;
    if (rec.l2_error >= 0.0) j["l2_error"] = rec.l2_error;
    j["h1_norm"] = rec.h1_norm;
    j["wall_time_s"] = rec.wall_time_s;
    if (rec.algebraic_residual >= 0.0) j["algebraic_residual"] = rec.algebraic_residual;
    j["phase"] = rec.phase;
    return j;
}

nlohmann::json summary_to_json(const RunSummary& s) {
    nlohmann::json j;
    j["status"] = s.status;
    j["iterations"] = s.iterations;
    j["final_residual"] = s.final_residual;
    if (s.min_l2_error >= 0.0) j["min_l2_error"] = s.min_l2_error;
    if (s.contraction >= 0.0) j["contraction"] = s.contraction;
    if (s.noise_interpolant >= 0.0) j["noise_interpolant_norm"] = s.noise_interpolant;
    if (s.error_to_noise >= 0.0) j["error_to_noise"] = s.error_to_noise;
    return j;
}

}  // namespace

std::string history_to_json(const IterationHistory& history, const std::string& config_json,
                            const RunSummary* summary) {
    nlohmann::json j;
    j["status"] = to_string(history.status);
    j["config"] = nlohmann::json::parse(config_json);
    nlohmann::json records = nlohmann::json::array();
    for (const auto& rec : history.records) records.push_back(record_to_json(rec));
    j["records"] = std::move(records);
    if (summary) j["summary"] = summary_to_json(*summary);
    return j.dump(2);
}

IterationHistory history_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    IterationHistory h;
    const std::string status = j.at("status").get<std::string>();
    h.status = status == "Converged" ? TerminalStatus::Converged
               : status == "Diverged" ? TerminalStatus::Diverged
                                      : TerminalStatus::MaxIter;
    for (const auto& r : j.at("records")) {
        IterationRecord rec;
        rec.k = r.at("k").get<int>();
        rec.l2_residual = r.at("l2_residual").get<double>();
        if (r.contains("l2_error")) rec.l2_error = r.at("l2_error").get<double>();
        rec.h1_norm = r.at("h1_norm").get<double>();
        rec.wall_time_s = r.at("wall_time_s").get<double>();
        if (r.contains("algebraic_residual"))
            rec.algebraic_residual = r.at("algebraic_residual").get<double>();
        rec.phase = r.at("phase").get<std::string>();
        h.records.push_back(std::move(rec));
    }
    return h;
}

void export_history(const IterationHistory& history, const std::string& path,
                    ExportFormat format, const std::string& config_json,
                    const RunSummary* summary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_history: cannot open " + path);
    out << (format == ExportFormat::CSV ? history_to_csv(history)
                                        : history_to_json(history, config_json, summary));
    if (!out) throw std::runtime_error("export_history: write failed for " + path);
}

}  // namespace cdanse::diag
