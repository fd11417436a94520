#include "weaklab/study.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace weaklab;

namespace {

Vector vec(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

py::dict outcome_dict(const StudyOutcome& o) {
  py::dict d;
  d["exit_code"] = o.exit_code;
  d["message"] = o.message;
  if (o.report) {
    d["status"] = o.report->status;
    d["csv"] = render_csv(o.report->rows);
    d["summary"] = o.report->summary_json;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_weaklab, m) {
  m.doc() = "Euler-scheme weak-error studies";

  py::register_exception<ConfigError>(m, "ConfigError");

  py::class_<SdeModel>(m, "SdeModel")
      .def_readonly("name", &SdeModel::name)
      .def_readonly("dim", &SdeModel::dim_d)
      .def("drift", [](const SdeModel& s, const std::vector<double>& x) {
        const Vector b = s.drift_at(vec(x));
        return std::vector<double>(b.data(), b.data() + b.size());
      });
  m.def("ou_model", &make_ou_model, py::arg("theta"), py::arg("sigma"), py::arg("dim") = 1);
  m.def("gbm_model", &make_gbm_model, py::arg("mu"), py::arg("sigma"));
  m.def("black_scholes_model", &make_black_scholes_log_model, py::arg("mu"), py::arg("sigma"));
  m.def("bounded_vol_model", &make_bounded_vol_model, py::arg("a0"), py::arg("b0"), py::arg("c0"));
  m.def("constant_model", [](double b0, double s0) {
    return make_constant_model(Vector::Constant(1, b0), Matrix::Constant(1, 1, s0));
  });

  py::class_<TestFunction>(m, "TestFunction").def_readonly("name", &TestFunction::name);
  m.def("identity", &TestFunction::identity);
  m.def("power", &TestFunction::power, py::arg("q"));
  m.def("exp_abs", &TestFunction::exp_abs, py::arg("rate") = 1.0);

  m.def(
      "estimate_expectation",
      [](const SdeModel& model, const TestFunction& f, const std::vector<double>& x, int n, double t,
         std::uint64_t n_samples, std::uint64_t seed) {
        py::gil_scoped_release release;
        const Estimate e = estimate_expectation(model, f, vec(x), n, t, n_samples, RngStream{seed, 0});
        return std::make_pair(e.value, e.std_error);
      },
      py::arg("model"), py::arg("f"), py::arg("x"), py::arg("n"), py::arg("t"), py::arg("n_samples"),
      py::arg("seed") = 1);
  m.def("gbm_euler_mean", &gbm_euler_mean, py::arg("mu"), py::arg("x"), py::arg("n"), py::arg("t"));
  m.def(
      "principal_density_pi",
      [](const SdeModel& model, double t, const std::vector<double>& x, const std::vector<double>& y) {
        const PiEvaluation p = principal_density_pi(model, t, vec(x), vec(y), {}, {});
        return std::make_pair(p.value, p.quad_error);
      },
      py::arg("model"), py::arg("t"), py::arg("x"), py::arg("y"));
  m.def(
      "density_error_exact",
      [](const SdeModel& model, int n, double t, const std::vector<double>& x, const std::vector<double>& y) {
        return density_error_exact(model, n, t, vec(x), vec(y), {}, {});
      },
      py::arg("model"), py::arg("n"), py::arg("t"), py::arg("x"), py::arg("y"));
  m.def(
      "fit_rate",
      [](const std::vector<int>& ns, const std::vector<double>& errors, const std::vector<double>& cis,
         double noise) {
        if (ns.size() != errors.size() || ns.size() != cis.size())
          throw InvalidArgument("fit_rate: inputs must have equal length");
        std::vector<RatePoint> pts;
        for (std::size_t i = 0; i < ns.size(); ++i) pts.push_back({ns[i], errors[i], cis[i]});
        const RateFit f = fit_rate(pts, noise);
        py::dict d;
        d["slope"] = f.slope;
        d["intercept"] = f.intercept;
        d["r_squared"] = f.r_squared;
        d["used"] = f.used;
        d["excluded"] = f.excluded;
        return d;
      },
      py::arg("n"), py::arg("errors"), py::arg("ci"), py::arg("noise") = 3.0);
  m.def(
      "black_scholes_call",
      [](double spot, double strike, double mu, double sigma, double t) {
        const BlackScholes b = black_scholes(Payoff::call(strike), spot, mu, sigma, t);
        return py::make_tuple(b.price, b.delta, b.gamma);
      },
      py::arg("spot"), py::arg("strike"), py::arg("mu"), py::arg("sigma"), py::arg("t"));

  m.def("list_studies", &study_catalog);
  m.def(
      "validate", [](const std::string& text) { return parse_config(text).study; }, py::arg("config_json"));
  m.def(
      "run_study",
      [](const std::string& text, bool write_files) {
        StudyOutcome o;
        {
          py::gil_scoped_release release;
          o = execute_config(text, write_files);
        }
        return outcome_dict(o);
      },
      py::arg("config_json"), py::arg("write_files") = false);
}
