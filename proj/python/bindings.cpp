#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tsvi/approx_kl.hpp"
#include "tsvi/baselines.hpp"
#include "tsvi/experiment.hpp"
#include "tsvi/steihaug.hpp"
#include "tsvi/trust_region.hpp"

namespace py = pybind11;
using namespace tsvi;

namespace {

struct PyTarget {
  ProblemSpec problem;
  std::shared_ptr<TargetModel> target;
};

PyTarget target_from_json(const std::string& text) {
  PyTarget t{problem_from_json(nlohmann::json::parse(text)), nullptr};
  t.target = make_target(t.problem);
  return t;
}

py::dict trace_to_dict(const Trace& trace) {
  std::vector<double> g, radius, rho, u, o, m;
  std::vector<bool> accepted;
  for (const auto& r : trace.rows) {
    g.push_back(r.gradient_magnitude);
    radius.push_back(r.radius_or_step);
    rho.push_back(r.rho);
    u.push_back(r.approx_kl_u);
    o.push_back(r.approx_kl_o);
    m.push_back(r.model_change);
    accepted.push_back(r.accepted);
  }
  py::dict d;
  d["method"] = trace.method;
  d["gradient_magnitude"] = g;
  d["radius_or_step"] = radius;
  d["rho"] = rho;
  d["approx_kl_u"] = u;
  d["approx_kl_o"] = o;
  d["model_change"] = m;
  d["accepted"] = accepted;
  d["warnings"] = trace.warnings;
  d["converged"] = trace.converged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_tsvi, m) {
  m.doc() = "Trust-region graphical Stein variational inference";

  py::register_exception<SingularityError>(m, "SingularityError", PyExc_ArithmeticError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<PyTarget>(m, "Target")
      .def_property_readonly("dim", [](const PyTarget& t) { return t.target->dim(); })
      .def_property_readonly("type", [](const PyTarget& t) { return t.problem.type_name(); })
      .def_property_readonly("factor_count", [](const PyTarget& t) { return t.target->layout().factor_count(); })
      .def("factor_dims", [](const PyTarget& t, std::size_t a) {
        const auto& f = t.target->layout().factor(a);
        std::vector<std::size_t> dims;
        for (std::size_t d = f.offset; d < f.end(); ++d) dims.push_back(d);
        return dims;
      })
      .def("markov_blanket", [](const PyTarget& t, std::size_t a) { return markov_blanket(*t.target, a); })
      .def("log_density", [](const PyTarget& t, const Vector& x) { return t.target->log_density(x); })
      .def("gradient", [](const PyTarget& t, const Vector& x) { return t.target->eval(x).gradient; })
      .def("hessian", [](const PyTarget& t, const Vector& x) { return t.target->hessian(x); })
      .def("hessian_block", [](const PyTarget& t, std::size_t a, std::size_t b, const Vector& x) {
        return t.target->hessian_block(a, b, x);
      })
      .def("dimension_names", [](const PyTarget& t) { return dimension_names(*t.target); })
      .def("to_json", [](const PyTarget& t) { return problem_to_json(t.problem).dump(); });

  m.def("generate_problem", [](const std::string& section) {
    PyTarget t{generate_problem(nlohmann::json::parse(section)), nullptr};
    t.target = make_target(t.problem);
    return t;
  }, py::arg("problem_section_json"));
  m.def("load_problem", &target_from_json, py::arg("problem_json"));
  m.def("gaussian_target", [](const Vector& mean, const Matrix& cov) {
    PyTarget t{ProblemSpec{GaussianProblem{mean, cov}}, nullptr};
    t.target = make_target(t.problem);
    return t;
  }, py::arg("mean"), py::arg("covariance"));

  m.def("ancestral_sample", [](const PyTarget& t, std::size_t count, Seed seed) {
    const auto* bn = std::get_if<BayesNetSpec>(&t.problem.model);
    if (!bn) throw std::invalid_argument("ancestral_sample needs a bayes_net target");
    return ancestral_sample(*bn, count, seed);
  }, py::arg("target"), py::arg("count"), py::arg("seed") = 0);

  m.def("stein_gradient", [](const RowMatrix& x, const PyTarget& t, double lengthscale, bool graphical, int workers) {
    if (graphical) return graphical_stein_gradient(x, *t.target, LocalKernelFamily(t.target->layout_ptr(), KernelSpec(lengthscale)), workers);
    return global_stein_gradient(x, *t.target, KernelSpec(lengthscale), workers);
  }, py::arg("particles"), py::arg("target"), py::arg("lengthscale"), py::arg("graphical") = true, py::arg("workers") = 1);

  m.def("stein_hessian", [](const RowMatrix& x, const PyTarget& t, std::size_t i, double lengthscale, bool graphical) {
    if (graphical) return graphical_hessian(x, *t.target, LocalKernelFamily(t.target->layout_ptr(), KernelSpec(lengthscale)), i).to_dense();
    return global_hessian(x, *t.target, KernelSpec(lengthscale), i).to_dense();
  }, py::arg("particles"), py::arg("target"), py::arg("index"), py::arg("lengthscale"), py::arg("graphical") = true);

  m.def("cg_steihaug", [](const Matrix& H, const Vector& g, double radius, std::optional<double> tol,
                          std::optional<std::size_t> max_iters) {
    const auto r = cg_steihaug([&](const Vector& v) { return Vector(H * v); }, g, radius,
                               tol.value_or(default_cg_tolerance(g.norm())),
                               max_iters.value_or(static_cast<std::size_t>(g.size())));
    return py::make_tuple(r.step, std::string(to_string(r.status)), r.model_change);
  }, py::arg("hessian"), py::arg("gradient"), py::arg("radius"), py::arg("tol") = py::none(),
     py::arg("max_iters") = py::none());

  m.def("approx_kl", [](const RowMatrix& x, const PyTarget& t, std::size_t m_size, double lengthscale, Seed seed) {
    return approx_kl(x, *t.target, m_size, KernelSpec(lengthscale), seed);
  }, py::arg("particles"), py::arg("target"), py::arg("nystrom_size"), py::arg("lengthscale"), py::arg("seed") = 0);

  m.def("mmd", [](const RowMatrix& x, const RowMatrix& y, double lengthscale, int workers) {
    return mmd(x, y, lengthscale, workers);
  }, py::arg("x"), py::arg("y"), py::arg("lengthscale"), py::arg("workers") = 1);
  m.def("median_heuristic", [](const RowMatrix& x, Seed seed) { return median_heuristic(x, seed); },
        py::arg("sample"), py::arg("seed") = 0);

  m.def("run", [](const std::string& method, const PyTarget& t, const RowMatrix& particles, std::size_t iterations,
                  double lengthscale, double step, double decay, double radius, Seed seed, int workers) {
    const DriverOptions opts{workers, false};
    ParticleSet p{particles, 0, seed};
    const LocalKernelFamily local(t.target->layout_ptr(), KernelSpec(lengthscale));
    RunResult r;
    switch (method_from_string(method)) {
      case Method::TrSviAt: r = tr_svi_at_run(p, *t.target, local, iterations, opts); break;
      case Method::TrSviKl: r = tr_svi_kl_run(p, *t.target, local, radius, iterations, seed, opts); break;
      case Method::MpSvgd: r = run_mp_svgd(p, *t.target, local, StepSchedule::fixed(step), iterations, opts); break;
      case Method::MpSvgdDlr: r = run_mp_svgd(p, *t.target, local, StepSchedule::decayed(step, decay), iterations, opts); break;
      case Method::MpSvgdAg: r = run_mp_svgd(p, *t.target, local, StepSchedule::adagrad(step), iterations, opts); break;
      case Method::SvnCtr: r = run_svn_ctr(p, *t.target, KernelSpec(lengthscale), radius, iterations, opts); break;
      case Method::Svgd: r = run_svgd(p, *t.target, KernelSpec(lengthscale), step, iterations, opts); break;
    }
    return py::make_tuple(r.particles.positions, trace_to_dict(r.trace));
  }, py::arg("method"), py::arg("target"), py::arg("particles"), py::arg("iterations"), py::arg("lengthscale") = 1.0,
     py::arg("step") = 0.1, py::arg("decay") = 0.99, py::arg("radius") = 1.0, py::arg("seed") = 0, py::arg("workers") = 1);

  m.def("run_experiment", [](const std::string& config_json, const std::filesystem::path& out_dir) {
    run_experiment(parse_experiment_config(nlohmann::json::parse(config_json)), out_dir);
  }, py::arg("config_json"), py::arg("out_dir"));
}
