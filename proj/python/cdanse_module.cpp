#include <memory>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cdanse/diagnostics.hpp"
#include "cdanse/experiment.hpp"

namespace py = pybind11;
using namespace cdanse;

namespace {

/// Owns the mesh + dofmap pair so Fields handed to python stay valid.
struct Problem {
    explicit Problem(int n) : mesh(uniform_cavity_mesh(n)), dm(DofMap::build(mesh)) {}
    Mesh mesh;
    DofMap dm;
};

Field field_from_array(const Problem& p, const py::array_t<double>& a) {
    if (a.ndim() != 1 || a.shape(0) != p.dm.n_u)
        throw std::invalid_argument("velocity array must have length n_u");
    Field u = Field::zero_velocity(p.dm);
    std::copy(a.data(), a.data() + p.dm.n_u, u.coeffs.begin());
    return u;
}

py::array_t<double> array_from_coeffs(const std::vector<double>& c) {
    py::array_t<double> a(static_cast<py::ssize_t>(c.size()));
    std::copy(c.begin(), c.end(), a.mutable_data());
    return a;
}

py::dict record_to_dict(const IterationRecord& r) {
    py::dict d;
    d["k"] = r.k;
    d["l2_residual"] = r.l2_residual;
    d["l2_error"] = r.l2_error >= 0.0 ? py::object(py::float_(r.l2_error)) : py::none();
    d["h1_norm"] = r.h1_norm;
    d["wall_time_s"] = r.wall_time_s;
    d["phase"] = r.phase;
    return d;
}

py::dict history_to_dict(const IterationHistory& h) {
    py::dict d;
    d["status"] = to_string(h.status);
    py::list records;
    for (const auto& r : h.records) records.append(record_to_dict(r));
    d["records"] = records;
    return d;
}

SolverConfig config_from_kwargs(double Re, double mu, double gamma_gd, double tol_residual,
                                int max_iter, double blowup_threshold, double switch_tol,
                                const std::string& ih_mode) {
    SolverConfig c;
    c.nu = 1.0 / Re;
    c.mu = mu;
    c.gamma_gd = gamma_gd;
    c.tol_residual = tol_residual;
    c.max_iter = max_iter;
    c.blowup_threshold = blowup_threshold;
    c.switch_tol = switch_tol;
    if (ih_mode == "point")
        c.ih_mode = IhMode::PointValue;
    else if (ih_mode == "cell_average")
        c.ih_mode = IhMode::CellAverage;
    else
        throw std::invalid_argument("ih_mode must be 'point' or 'cell_average'");
    c.validate();
    return c;
}

}  // namespace

PYBIND11_MODULE(_cdanse, m) {
    m.doc() = "steady Navier-Stokes cavity solvers with coarse-data nudging";

    py::class_<Problem, std::shared_ptr<Problem>>(m, "Problem")
        .def(py::init<int>(), py::arg("n"))
        .def_property_readonly("n", [](const Problem& p) { return p.mesh.n; })
        .def_property_readonly("n_u", [](const Problem& p) { return p.dm.n_u; })
        .def_property_readonly("n_p", [](const Problem& p) { return p.dm.n_p; })
        .def_property_readonly("n_vertices",
                               [](const Problem& p) { return p.mesh.vertices.size(); })
        .def_property_readonly("n_triangles",
                               [](const Problem& p) { return p.mesh.triangles.size(); });

    py::class_<ObservationSet>(m, "ObservationSet")
        .def_property_readonly("snr", [](const ObservationSet& o) { return o.snr; })
        .def_property_readonly("seed", [](const ObservationSet& o) { return o.seed; })
        .def_property_readonly("N", [](const ObservationSet& o) { return o.grid.N; })
        .def_property_readonly("vertices",
                               [](const ObservationSet& o) { return o.obs_vertices; })
        .def("noise_interpolant_norm",
             [](const ObservationSet& o) { return noise_interpolant_norm(o); })
        .def("to_json", [](const ObservationSet& o) { return observation_set_to_json(o); });

    m.def("observation_set_from_json", &observation_set_from_json, py::arg("text"));

    m.def(
        "locate_observation_vertices",
        [](const Problem& p, int N) {
            return locate_observation_vertices(p.mesh, CoarseGrid::make(N));
        },
        py::arg("problem"), py::arg("N"));

    m.def(
        "make_observations",
        [](const Problem& p, const py::array_t<double>& reference, int N, double snr,
           double u_max, std::uint64_t seed) {
            const Field ref = field_from_array(p, reference);
            const CoarseGrid grid = CoarseGrid::make(N);
            const auto verts = locate_observation_vertices(p.mesh, grid);
            return make_observation_set(ref, grid, verts, snr, u_max, seed);
        },
        py::arg("problem"), py::arg("reference"), py::arg("N"), py::arg("snr") = 0.0,
        py::arg("u_max") = 1.0, py::arg("seed") = 1);

    m.def(
        "compute_reference",
        [](const Problem& p, double Re, double gamma_gd) {
            SolverConfig c;
            c.nu = 1.0 / Re;
            c.gamma_gd = gamma_gd;
            const auto result = compute_reference_detailed(p.mesh, p.dm, 1.0 / Re, c);
            return py::make_tuple(array_from_coeffs(result.u.coeffs), result.final_residual);
        },
        py::arg("problem"), py::arg("Re"), py::arg("gamma_gd") = 1.0,
        "Reynolds-continuation reference; returns (coeffs, final_residual).");

    m.def(
        "solve",
        [](const Problem& p, const std::string& method, double Re, double mu, double gamma_gd,
           double tol_residual, int max_iter, double blowup_threshold, double switch_tol,
           const std::string& ih_mode, const ObservationSet* obs,
           const std::optional<py::array_t<double>>& reference) {
            const SolverConfig c =
                config_from_kwargs(Re, mu, gamma_gd, tol_residual, max_iter, blowup_threshold,
                                   switch_tol, ih_mode);
            std::optional<Field> ref;
            if (reference) ref = field_from_array(p, *reference);
            const Field* ref_ptr = ref ? &*ref : nullptr;

            const bool needs_obs = method == "cda_picard" || method == "hybrid";
            if (needs_obs && !obs)
                throw std::invalid_argument(method + " requires observations");
            ProblemContext ctx =
                ProblemContext::build(p.mesh, p.dm, c, {}, needs_obs ? obs : nullptr);

            std::pair<Field, IterationHistory> result;
            if (method == "picard")
                result = run_picard(ctx, ref_ptr);
            else if (method == "newton")
                result = run_newton(ctx, ref_ptr);
            else if (method == "cda_picard")
                result = run_cda_picard(ctx, *obs, ref_ptr);
            else if (method == "hybrid")
                result = hybrid_cda_newton(ctx, *obs, ref_ptr);
            else
                throw std::invalid_argument("unknown method '" + method + "'");
            return py::make_tuple(array_from_coeffs(result.first.coeffs),
                                  history_to_dict(result.second));
        },
        py::arg("problem"), py::arg("method"), py::arg("Re"), py::arg("mu") = 0.0,
        py::arg("gamma_gd") = 1.0, py::arg("tol_residual") = 1e-8, py::arg("max_iter") = 500,
        py::arg("blowup_threshold") = 1e4, py::arg("switch_tol") = 1e-2,
        py::arg("ih_mode") = "point", py::arg("observations") = nullptr,
        py::arg("reference") = py::none(),
        "Run one solver; returns (velocity_coeffs, history dict).");

    m.def(
        "norms",
        [](const Problem& p, const py::array_t<double>& u,
           const std::optional<py::array_t<double>>& reference) {
            const Field field = field_from_array(p, u);
            std::optional<Field> ref;
            if (reference) ref = field_from_array(p, *reference);
            const Norms n = compute_norms(field, ref ? &*ref : nullptr);
            py::dict d;
            d["l2"] = n.l2;
            d["h1_semi"] = n.h1_semi;
            d["div_l2"] = n.div_l2;
            d["l2_error"] = n.l2_error ? py::object(py::float_(*n.l2_error)) : py::none();
            return d;
        },
        py::arg("problem"), py::arg("u"), py::arg("reference") = py::none());

    m.def(
        "contraction_rate",
        [](const std::vector<double>& residuals, int window) {
            IterationHistory h;
            for (std::size_t i = 0; i < residuals.size(); ++i)
                h.records.push_back({static_cast<int>(i), residuals[i], -1.0, 0.0, 0.0, -1.0, ""});
            return diag::contraction_rate(h, window);
        },
        py::arg("residuals"), py::arg("window") = 10);

    m.def(
        "theory_report",
        [](double Re, double mu, double H, double K1, double C_I) {
            SolverConfig c;
            c.nu = 1.0 / Re;
            c.mu = mu;
            const diag::TheoryBounds b = diag::theory_report(c, H, K1, C_I);
            py::dict d;
            d["gamma"] = b.gamma;
            d["predicted_rate"] = b.predicted_rate;
            d["lambda_hat"] = b.lambda_hat;
            d["lambda_bar"] = b.lambda_bar;
            d["mu_above_2K1"] = b.mu_above_2K1;
            d["H_below_clean_limit"] = b.H_below_clean_limit;
            d["lambda_bar_above_2"] = b.lambda_bar_above_2;
            d["mu_above_4K1sq"] = b.mu_above_4K1sq;
            d["mu_below_nu_over_CIH2"] = b.mu_below_nu_over_CIH2;
            return d;
        },
        py::arg("Re"), py::arg("mu"), py::arg("H"), py::arg("K1"), py::arg("C_I") = 1.0);

    m.def(
        "estimate_K1",
        [](const Problem& p, const py::array_t<double>& u) {
            return diag::estimate_K1(field_from_array(p, u));
        },
        py::arg("problem"), py::arg("u"));
}
