#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cdanse/experiment.hpp"

using namespace cdanse;
using namespace cdanse::experiment;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("cdanse_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config parsing applies defaults and rejects unknown keys") {
    const ExperimentConfig cfg = parse_experiment_config(R"({
        "problem": {"n": 16, "Re": 500},
        "solver": {"method": "newton", "tol_residual": 1e-9}
    })");
    CHECK(cfg.problem.n == 16);
    CHECK(cfg.problem.Re == 500.0);
    CHECK(cfg.problem.gamma_gd == 1.0);
    CHECK(cfg.observations.N == 10);
    CHECK(cfg.solver.method == "newton");
    CHECK(cfg.solver.tol_residual == 1e-9);
    CHECK(cfg.solver.max_iter == 500);
    CHECK(cfg.output_dir == "out");

    CHECK_THROWS_AS(parse_experiment_config(R"({"probelm": {}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_experiment_config(R"({"problem": {"Re": 500, "nu": 0.1}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_experiment_config(R"({"solver": {"method": "gauss"}})"),
                    std::invalid_argument);
}

TEST_CASE("CDANSE_SEED overrides the configured seed") {
    setenv("CDANSE_SEED", "777", 1);
    const ExperimentConfig cfg = parse_experiment_config(R"({
        "observations": {"seed": 5},
        "sweep": {"seed": [1, 2, 3]}
    })");
    unsetenv("CDANSE_SEED");
    CHECK(cfg.observations.seed == 777);
    CHECK(cfg.sweep.seed.empty());  // the override collapses the seed axis

    const ExperimentConfig plain = parse_experiment_config(R"({"observations": {"seed": 5}})");
    CHECK(plain.observations.seed == 5);
}

TEST_CASE("config serialization is stable and hashable") {
    const ExperimentConfig cfg = parse_experiment_config(R"({"problem": {"Re": 1000}})");
    const std::string a = experiment_config_to_json(cfg);
    const std::string b = experiment_config_to_json(parse_experiment_config(a));
    CHECK(a == b);
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    CHECK(config_hash(a) != config_hash(a + " "));
}

TEST_CASE("field files round trip bit-for-bit") {
    const Mesh mesh = uniform_cavity_mesh(6);
    const DofMap dm = DofMap::build(mesh);
    Field u = Field::zero_velocity(dm);
    for (std::size_t i = 0; i < u.coeffs.size(); ++i)
        u.coeffs[i] = std::sin(1e3 * static_cast<double>(i)) / 3.0;
    u.coeffs[0] = -0.0;

    const fs::path dir = fresh_dir("field");
    save_field(dir / "u.field.json", u, "deadbeef00000000");
    const Field back = load_field(dir / "u.field.json", dm);
    REQUIRE(back.coeffs.size() == u.coeffs.size());
    for (std::size_t i = 0; i < u.coeffs.size(); ++i)
        CHECK(std::memcmp(&back.coeffs[i], &u.coeffs[i], sizeof(double)) == 0);

    const Mesh other = uniform_cavity_mesh(7);
    const DofMap dm_other = DofMap::build(other);
    CHECK_THROWS(load_field(dir / "u.field.json", dm_other));
}

TEST_CASE("reference and run commands produce the pinned artifacts") {
    const fs::path dir = fresh_dir("cmdrun");
    ExperimentConfig cfg = parse_experiment_config(R"({
        "problem": {"n": 8, "Re": 100},
        "solver": {"method": "picard"}
    })");
    cfg.output_dir = dir.string();

    std::ostringstream log;
    REQUIRE(cmd_reference(cfg, log) == 0);
    CHECK(fs::exists(reference_path(cfg, 100.0)));

    REQUIRE(cmd_run(cfg, false, log) == 0);
    const std::string csv = slurp(dir / "history.csv");
    CHECK(csv.rfind("k,l2_residual,l2_error,h1_norm,wall_time_s,phase\n", 0) == 0);
    CHECK(csv.find("picard") != std::string::npos);
    CHECK(fs::exists(dir / "history.json"));
    CHECK(fs::exists(dir / "summary.json"));

    // non-convergence exits nonzero unless allowed
    cfg.solver.max_iter = 1;
    cfg.solver.tol_residual = 1e-15;
    CHECK(cmd_run(cfg, false, log) == 1);
    CHECK(cmd_run(cfg, true, log) == 0);
}

TEST_CASE("cda run without a reference fails loudly") {
    const fs::path dir = fresh_dir("noref");
    ExperimentConfig cfg = parse_experiment_config(R"({
        "problem": {"n": 8, "Re": 100},
        "solver": {"method": "cda_picard", "mu": 100.0}
    })");
    cfg.output_dir = dir.string();
    std::ostringstream log;
    CHECK(cmd_run(cfg, false, log) == 2);
    CHECK(log.str().find("reference") != std::string::npos);
}

TEST_CASE("sweep covers the cartesian grid and always exits zero") {
    const fs::path dir = fresh_dir("sweep");
    ExperimentConfig cfg = parse_experiment_config(R"({
        "problem": {"n": 8, "Re": 100},
        "solver": {"method": "cda_picard", "mu": 100.0, "max_iter": 60},
        "sweep": {"snr": [0.0, 0.01], "seed": [1, 2]}
    })");
    cfg.output_dir = dir.string();
    std::ostringstream log;
    REQUIRE(cmd_sweep(cfg, 2, log) == 0);

    const std::string table = slurp(dir / "sweep_summary.csv");
    int lines = 0;
    for (char ch : table)
        if (ch == '\n') ++lines;
    CHECK(lines == 5);  // header + 4 runs
    CHECK(fs::exists(dir / "run_Re100_mu100_N10_snr0_seed1" / "history.csv"));
    CHECK(fs::exists(dir / "run_Re100_mu100_N10_snr0.01_seed2" / "summary.json"));
    // snr = 0 runs with different seeds are identical
    CHECK(slurp(dir / "run_Re100_mu100_N10_snr0_seed1" / "history.csv")
              .substr(0, 100) ==
          slurp(dir / "run_Re100_mu100_N10_snr0_seed2" / "history.csv").substr(0, 100));
}
