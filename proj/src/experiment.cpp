#include "cdanse/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace cdanse::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmtg(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

IhMode parse_ih_mode(const std::string& s) {
    if (s == "point") return IhMode::PointValue;
    if (s == "cell_average") return IhMode::CellAverage;
    throw std::invalid_argument("config: ih_mode must be 'point' or 'cell_average'");
}

std::string ih_mode_name(IhMode m) {
    return m == IhMode::PointValue ? "point" : "cell_average";
}

}  // namespace

SolverConfig ExperimentConfig::solver_config() const {
    SolverConfig sc;
    sc.nu = 1.0 / problem.Re;
    sc.mu = solver.mu;
    sc.gamma_gd = problem.gamma_gd;
    sc.tol_residual = solver.tol_residual;
    sc.max_iter = solver.max_iter;
    sc.blowup_threshold = solver.blowup_threshold;
    sc.switch_tol = solver.switch_tol;
    sc.ih_mode = observations.ih_mode;
    sc.lid_value = problem.lid;
    return sc;
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    const json j = json::parse(json_text);
    reject_unknown_keys(j, {"problem", "observations", "solver", "sweep", "output_dir",
                            "reference_file"},
                        "top level");

    ExperimentConfig cfg;
    if (j.contains("problem")) {
        const auto& p = j.at("problem");
        reject_unknown_keys(p, {"n", "Re", "lid", "gamma_gd"}, "problem");
        if (p.contains("n")) cfg.problem.n = p.at("n").get<int>();
        if (p.contains("Re")) cfg.problem.Re = p.at("Re").get<double>();
        if (p.contains("lid")) {
            const auto& lid = p.at("lid");
            cfg.problem.lid = {lid.at(0).get<double>(), lid.at(1).get<double>()};
        }
        if (p.contains("gamma_gd")) cfg.problem.gamma_gd = p.at("gamma_gd").get<double>();
    }
    if (j.contains("observations")) {
        const auto& o = j.at("observations");
        reject_unknown_keys(o, {"N", "snr", "seed", "u_max", "ih_mode"}, "observations");
        if (o.contains("N")) cfg.observations.N = o.at("N").get<int>();
        if (o.contains("snr")) cfg.observations.snr = o.at("snr").get<double>();
        if (o.contains("seed")) cfg.observations.seed = o.at("seed").get<std::uint64_t>();
        if (o.contains("u_max")) cfg.observations.u_max = o.at("u_max").get<double>();
        if (o.contains("ih_mode")) cfg.observations.ih_mode = parse_ih_mode(o.at("ih_mode"));
    }
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        reject_unknown_keys(s, {"method", "mu", "tol_residual", "max_iter", "blowup_threshold",
                                "switch_tol"},
                            "solver");
        if (s.contains("method")) cfg.solver.method = s.at("method").get<std::string>();
        if (s.contains("mu")) cfg.solver.mu = s.at("mu").get<double>();
        if (s.contains("tol_residual")) cfg.solver.tol_residual = s.at("tol_residual").get<double>();
        if (s.contains("max_iter")) cfg.solver.max_iter = s.at("max_iter").get<int>();
        if (s.contains("blowup_threshold"))
            cfg.solver.blowup_threshold = s.at("blowup_threshold").get<double>();
        if (s.contains("switch_tol")) cfg.solver.switch_tol = s.at("switch_tol").get<double>();
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        reject_unknown_keys(s, {"Re", "mu", "N", "snr", "seed"}, "sweep");
        if (s.contains("Re")) cfg.sweep.Re = s.at("Re").get<std::vector<double>>();
        if (s.contains("mu")) cfg.sweep.mu = s.at("mu").get<std::vector<double>>();
        if (s.contains("N")) cfg.sweep.N = s.at("N").get<std::vector<int>>();
        if (s.contains("snr")) cfg.sweep.snr = s.at("snr").get<std::vector<double>>();
        if (s.contains("seed")) cfg.sweep.seed = s.at("seed").get<std::vector<std::uint64_t>>();
    }
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("reference_file"))
        cfg.reference_file = j.at("reference_file").get<std::string>();

    static const std::vector<std::string> methods = {"picard", "newton", "cda_picard", "hybrid"};
    if (std::find(methods.begin(), methods.end(), cfg.solver.method) == methods.end())
        throw std::invalid_argument("config: unknown solver method '" + cfg.solver.method + "'");
    if (cfg.problem.n < 2) throw std::invalid_argument("config: n must be >= 2");
    if (cfg.observations.N < 1) throw std::invalid_argument("config: N must be >= 1");
    if (cfg.problem.Re <= 0.0) throw std::invalid_argument("config: Re must be positive");

    if (const char* env_seed = std::getenv("CDANSE_SEED")) {
        cfg.observations.seed = std::strtoull(env_seed, nullptr, 10);
        cfg.sweep.seed.clear();
    }
    return cfg;
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["problem"] = {{"n", cfg.problem.n},
                    {"Re", cfg.problem.Re},
                    {"lid", {cfg.problem.lid.x, cfg.problem.lid.y}},
                    {"gamma_gd", cfg.problem.gamma_gd}};
    j["observations"] = {{"N", cfg.observations.N},
                         {"snr", cfg.observations.snr},
                         {"seed", cfg.observations.seed},
                         {"u_max", cfg.observations.u_max},
                         {"ih_mode", ih_mode_name(cfg.observations.ih_mode)}};
    j["solver"] = {{"method", cfg.solver.method},
                   {"mu", cfg.solver.mu},
                   {"tol_residual", cfg.solver.tol_residual},
                   {"max_iter", cfg.solver.max_iter},
                   {"blowup_threshold", cfg.solver.blowup_threshold},
                   {"switch_tol", cfg.solver.switch_tol}};
    if (!cfg.sweep.Re.empty() || !cfg.sweep.mu.empty() || !cfg.sweep.N.empty() ||
        !cfg.sweep.snr.empty() || !cfg.sweep.seed.empty()) {
        json s = json::object();
        if (!cfg.sweep.Re.empty()) s["Re"] = cfg.sweep.Re;
        if (!cfg.sweep.mu.empty()) s["mu"] = cfg.sweep.mu;
        if (!cfg.sweep.N.empty()) s["N"] = cfg.sweep.N;
        if (!cfg.sweep.snr.empty()) s["snr"] = cfg.sweep.snr;
        if (!cfg.sweep.seed.empty()) s["seed"] = cfg.sweep.seed;
        j["sweep"] = std::move(s);
    }
    j["output_dir"] = cfg.output_dir;
    if (cfg.reference_file) j["reference_file"] = *cfg.reference_file;
    return j.dump(2);
}

std::string config_hash(const std::string& config_json) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : config_json) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

fs::path reference_path(const ExperimentConfig& cfg, double Re) {
    if (cfg.reference_file) return *cfg.reference_file;
    return fs::path(cfg.output_dir) /
           ("ref_Re" + fmtg(Re) + "_n" + std::to_string(cfg.problem.n) + ".field.json");
}

void save_field(const fs::path& path, const Field& u, const std::string& hash) {
    const DofMap& dm = *u.dofmap;
    std::string payload;
    payload.reserve(u.coeffs.size() * 16);
    for (double v : u.coeffs) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(bits));
        payload += buf;
    }
    json j;
    j["format"] = "cdanse-field-v1";
    j["mesh_n"] = dm.mesh->n;
    j["n_u"] = dm.n_u;
    j["n_p"] = dm.n_p;
    j["config_hash"] = hash;
    j["payload_encoding"] = "hex-le-f64";
    j["payload"] = std::move(payload);
    write_file(path, j.dump(2));
}

Field load_field(const fs::path& path, const DofMap& dm) {
    const json j = json::parse(read_file(path));
    if (j.at("format") != "cdanse-field-v1")
        throw std::runtime_error("load_field: unsupported format in " + path.string());
    if (j.at("mesh_n").get<int>() != dm.mesh->n)
        throw std::runtime_error("load_field: mesh mismatch (file n=" +
                                 std::to_string(j.at("mesh_n").get<int>()) + ", dofmap n=" +
                                 std::to_string(dm.mesh->n) + ")");
    if (j.at("n_u").get<int>() != dm.n_u)
        throw std::runtime_error("load_field: dof count mismatch in " + path.string());
    const std::string payload = j.at("payload").get<std::string>();
    if (payload.size() != static_cast<std::size_t>(dm.n_u) * 16)
        throw std::runtime_error("load_field: payload length mismatch in " + path.string());

    Field u = Field::zero_velocity(dm);
    for (int i = 0; i < dm.n_u; ++i) {
        const std::uint64_t bits = std::strtoull(payload.substr(i * 16, 16).c_str(), nullptr, 16);
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        u.coeffs[i] = v;
    }
    return u;
}

namespace {

struct RunResult {
    IterationHistory history;
    diag::RunSummary summary;
    std::string error;  // nonempty when the run threw
};

bool method_needs_observations(const std::string& method) {
    return method == "cda_picard" || method == "hybrid";
}

RunResult execute_run(const ExperimentConfig& cfg) {
    RunResult out;
    try {
        const Mesh mesh = uniform_cavity_mesh(cfg.problem.n);
        const DofMap dm = DofMap::build(mesh);
        const SolverConfig sc = cfg.solver_config();

        std::optional<Field> reference;
        const fs::path ref_path = reference_path(cfg, cfg.problem.Re);
        if (fs::exists(ref_path)) {
            reference = load_field(ref_path, dm);
        } else if (method_needs_observations(cfg.solver.method)) {
            throw std::runtime_error("missing reference file " + ref_path.string() +
                                     " (run the 'reference' command first)");
        }

        std::optional<ObservationSet> obs;
        std::optional<ProblemContext> ctx;
        if (method_needs_observations(cfg.solver.method)) {
            const CoarseGrid grid = CoarseGrid::make(cfg.observations.N);
            const auto verts = locate_observation_vertices(mesh, grid);
            obs = make_observation_set(*reference, grid, verts, cfg.observations.snr,
                                       cfg.observations.u_max, cfg.observations.seed);
            ctx.emplace(ProblemContext::build(mesh, dm, sc, {}, &*obs));
        } else {
            ctx.emplace(ProblemContext::build(mesh, dm, sc));
        }

        const Field* ref_ptr = reference ? &*reference : nullptr;
        std::pair<Field, IterationHistory> result;
        if (cfg.solver.method == "picard")
            result = run_picard(*ctx, ref_ptr);
        else if (cfg.solver.method == "newton")
            result = run_newton(*ctx, ref_ptr);
        else if (cfg.solver.method == "cda_picard")
            result = run_cda_picard(*ctx, *obs, ref_ptr);
        else
            result = hybrid_cda_newton(*ctx, *obs, ref_ptr);

        out.history = std::move(result.second);
        out.summary = diag::summarize(out.history, obs ? &*obs : nullptr);
    } catch (const std::exception& e) {
        out.error = e.what();
        out.summary.status = "Error";
    }
    return out;
}

void write_run_outputs(const ExperimentConfig& cfg, const RunResult& result,
                       const fs::path& dir) {
    fs::create_directories(dir);
    const std::string config_json = experiment_config_to_json(cfg);
    diag::export_history(result.history, (dir / "history.csv").string(),
                         diag::ExportFormat::CSV);
    diag::export_history(result.history, (dir / "history.json").string(),
                         diag::ExportFormat::JSON, config_json, &result.summary);
    json j;
    j["config"] = json::parse(config_json);
    j["summary"] = json::parse(diag::history_to_json({}, "{}", &result.summary)).at("summary");
    if (!result.error.empty()) j["error"] = result.error;
    write_file(dir / "summary.json", j.dump(2));
}

void ensure_reference(const ExperimentConfig& cfg, double Re, std::ostream& log) {
    const fs::path path = reference_path(cfg, Re);
    if (fs::exists(path)) return;
    log << "computing reference at Re=" << fmtg(Re) << " (n=" << cfg.problem.n << ")...\n";
    const Mesh mesh = uniform_cavity_mesh(cfg.problem.n);
    const DofMap dm = DofMap::build(mesh);
    const auto result = compute_reference_detailed(mesh, dm, 1.0 / Re, cfg.solver_config());
    ExperimentConfig resolved = cfg;
    resolved.problem.Re = Re;
    save_field(path, result.u, config_hash(experiment_config_to_json(resolved)));
    log << "  terminal residual " << fmt17(result.final_residual) << ", wrote " << path.string()
        << "\n";
}

}  // namespace

int cmd_reference(const ExperimentConfig& cfg, std::ostream& log) {
    try {
        const fs::path path = reference_path(cfg, cfg.problem.Re);
        if (fs::exists(path)) fs::remove(path);
        ensure_reference(cfg, cfg.problem.Re, log);
    } catch (const std::exception& e) {
        log << "reference generation failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int cmd_run(const ExperimentConfig& cfg, bool allow_failure, std::ostream& log) {
    const RunResult result = execute_run(cfg);
    write_run_outputs(cfg, result, cfg.output_dir);
    if (!result.error.empty()) {
        log << "run failed: " << result.error << "\n";
        return 2;
    }
    log << "status " << result.summary.status << " after " << result.summary.iterations
        << " iterations, final residual " << fmt17(result.summary.final_residual) << "\n";
    if (result.summary.status != "Converged" && !allow_failure) return 1;
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, int jobs, std::ostream& log) {
    auto re_axis = cfg.sweep.Re.empty() ? std::vector<double>{cfg.problem.Re} : cfg.sweep.Re;
    auto mu_axis = cfg.sweep.mu.empty() ? std::vector<double>{cfg.solver.mu} : cfg.sweep.mu;
    auto n_axis = cfg.sweep.N.empty() ? std::vector<int>{cfg.observations.N} : cfg.sweep.N;
    auto snr_axis = cfg.sweep.snr.empty() ? std::vector<double>{cfg.observations.snr} : cfg.sweep.snr;
    auto seed_axis = cfg.sweep.seed.empty() ? std::vector<std::uint64_t>{cfg.observations.seed}
                                            : cfg.sweep.seed;

    // Lexicographic config order: Re, mu, N, snr, seed.
    std::vector<ExperimentConfig> runs;
    for (double Re : re_axis)
        for (double mu : mu_axis)
            for (int N : n_axis)
                for (double snr : snr_axis)
                    for (std::uint64_t seed : seed_axis) {
                        ExperimentConfig r = cfg;
                        r.sweep = {};
                        r.problem.Re = Re;
                        r.solver.mu = mu;
                        r.observations.N = N;
                        r.observations.snr = snr;
                        r.observations.seed = seed;
                        runs.push_back(std::move(r));
                    }

    try {
        // Also wanted for picard/newton sweeps, to track errors against the reference.
        for (double Re : re_axis) ensure_reference(cfg, Re, log);
    } catch (const std::exception& e) {
        log << "sweep aborted, reference generation failed: " << e.what() << "\n";
        return 1;
    }

    std::vector<RunResult> results(runs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= runs.size()) return;
            results[i] = execute_run(runs[i]);
            std::lock_guard lock(log_mutex);
            log << "[" << (i + 1) << "/" << runs.size() << "] Re=" << fmtg(runs[i].problem.Re)
                << " mu=" << fmtg(runs[i].solver.mu) << " N=" << runs[i].observations.N
                << " snr=" << fmtg(runs[i].observations.snr) << " seed="
                << runs[i].observations.seed << " -> " << results[i].summary.status << "\n";
        }
    };
    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(runs.size())));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    const fs::path out_dir(cfg.output_dir);
    std::string table =
        "Re,mu,N,snr,seed,status,iterations,final_residual,min_l2_error,contraction,"
        "noise_interpolant_norm,error_to_noise,error\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        const auto& s = results[i].summary;
        const fs::path run_dir =
            out_dir / ("run_Re" + fmtg(r.problem.Re) + "_mu" + fmtg(r.solver.mu) + "_N" +
                       std::to_string(r.observations.N) + "_snr" + fmtg(r.observations.snr) +
                       "_seed" + std::to_string(r.observations.seed));
        write_run_outputs(r, results[i], run_dir);

        table += fmtg(r.problem.Re) + "," + fmtg(r.solver.mu) + "," +
                 std::to_string(r.observations.N) + "," + fmtg(r.observations.snr) + "," +
                 std::to_string(r.observations.seed) + "," + s.status + "," +
                 std::to_string(s.iterations) + "," + fmt17(s.final_residual) + "," +
                 (s.min_l2_error >= 0.0 ? fmt17(s.min_l2_error) : "") + "," +
                 (s.contraction >= 0.0 ? fmt17(s.contraction) : "") + "," +
                 (s.noise_interpolant >= 0.0 ? fmt17(s.noise_interpolant) : "") + "," +
                 (s.error_to_noise >= 0.0 ? fmt17(s.error_to_noise) : "") + "," +
                 results[i].error + "\n";
    }
    write_file(out_dir / "sweep_summary.csv", table);
    log << "sweep complete: " << runs.size() << " runs, table at "
        << (out_dir / "sweep_summary.csv").string() << "\n";
    return 0;
}

}  // namespace cdanse::experiment
