#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cdanse/diagnostics.hpp"
#include "cdanse/solvers.hpp"

namespace cdanse::experiment {

struct ProblemParams {
    int n = 32;
    double Re = 3000.0;
    Vec2 lid{1.0, 0.0};
    double gamma_gd = 1.0;
};

struct ObservationParams {
    int N = 10;
    double snr = 0.0;
    std::uint64_t seed = 1;
    double u_max = 1.0;
    IhMode ih_mode = IhMode::PointValue;
};

struct SolverParams {
    std::string method = "picard";  // picard | newton | cda_picard | hybrid
    double mu = 0.0;
    double tol_residual = 1e-8;
    int max_iter = 500;
    double blowup_threshold = 1e4;
    double switch_tol = 1e-2;
};

struct SweepAxes {
    std::vector<double> Re;
    std::vector<double> mu;
    std::vector<int> N;
    std::vector<double> snr;
    std::vector<std::uint64_t> seed;
};

struct ExperimentConfig {
    ProblemParams problem;
    ObservationParams observations;
    SolverParams solver;
    SweepAxes sweep;  // empty axes default to the base config's single value
    std::string output_dir = "out";
    std::optional<std::string> reference_file;

    SolverConfig solver_config() const;
};

/// Parses the single-document JSON config; unknown keys are rejected.
/// The CDANSE_SEED environment variable, when set, overrides the seed.
ExperimentConfig parse_experiment_config(const std::string& json_text);
std::string experiment_config_to_json(const ExperimentConfig& cfg);

std::filesystem::path reference_path(const ExperimentConfig& cfg, double Re);

// -- field files: JSON header + hex payload of little-endian 64-bit floats --

void save_field(const std::filesystem::path& path, const Field& u, const std::string& config_hash);
Field load_field(const std::filesystem::path& path, const DofMap& dm);

std::string config_hash(const std::string& config_json);

// -- CLI verbs; each returns a process exit code --

int cmd_reference(const ExperimentConfig& cfg, std::ostream& log);
int cmd_run(const ExperimentConfig& cfg, bool allow_failure, std::ostream& log);
int cmd_sweep(const ExperimentConfig& cfg, int jobs, std::ostream& log);

}  // namespace cdanse::experiment
