#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "simplex_stdp/dynamics.hpp"
#include "simplex_stdp/errors.hpp"
#include "simplex_stdp/flow.hpp"
#include "simplex_stdp/mirror.hpp"
#include "simplex_stdp/scenarios.hpp"
#include "simplex_stdp/simplex.hpp"
#include "simplex_stdp/spiking.hpp"
#include "simplex_stdp/theory.hpp"
#include "simplex_stdp/version.hpp"

namespace py = pybind11;
using namespace simplex_stdp;

namespace {

py::dict trajectory(const TrajectoryRecord& rec) {
  std::vector<Vector> states;
  for (const auto& s : rec.states) states.push_back(s.values());
  py::dict out;
  out["steps"] = rec.steps;
  out["states"] = states;
  if (!rec.weights.empty()) {
    std::vector<Vector> weights;
    for (const auto& w : rec.weights) weights.push_back(w.values());
    out["weights"] = weights;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hebbian STDP as noisy gradient descent on the probability simplex";
  m.attr("__version__") = std::string(kVersion);

  auto base = py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IntegrationError>(m, "IntegrationError", PyExc_RuntimeError);

  m.def("loss", [](const Vector& p) { return loss(p); }, py::arg("p"));
  m.def("loss_gradient", [](const Vector& p) { return loss_gradient(p); }, py::arg("p"));
  m.def("loss_hessian", [](const Vector& p) { return loss_hessian(p); }, py::arg("p"));
  m.def(
      "critical_points",
      [](std::size_t d) {
        py::list out;
        for (const auto& c : critical_points(d)) {
          py::dict e;
          e["support"] = c.support;
          e["point"] = c.point.values();
          e["minimum"] = c.kind == CriticalKind::minimum;
          e["loss"] = loss(c.point);
          out.append(e);
        }
        return out;
      },
      py::arg("d"));
  m.def(
      "probabilities_from_weights",
      [](const Vector& lambda, const Vector& w) {
        return probabilities_from_weights(IntensityVector(lambda), WeightVector(w)).values();
      },
      py::arg("lam"), py::arg("w"));
  m.def(
      "step_probabilities",
      [](const Vector& p, double alpha, const Vector& y) {
        return step_probabilities(ProbabilityVector(p), alpha, y).values();
      },
      py::arg("p"), py::arg("alpha"), py::arg("y"));
  m.def(
      "run_trajectory",
      [](const Vector& p0, double alpha, std::size_t iterations, std::uint64_t seed, std::size_t stride) {
        DynamicsConfig cfg;
        cfg.p0 = p0;
        cfg.alpha = alpha;
        cfg.iterations = iterations;
        cfg.stride = stride;
        return trajectory(run_trajectory(cfg, seed));
      },
      py::arg("p0"), py::arg("alpha"), py::arg("iterations"), py::arg("seed") = 0, py::arg("stride") = 1);

  m.def("exact_d2", &exact_d2, py::arg("p1"), py::arg("t"));
  m.def(
      "integrate_flow",
      [](const Vector& p0, double horizon, double dt, std::size_t stride) {
        FlowSpec spec;
        spec.p0 = p0;
        spec.horizon = horizon;
        spec.dt = dt;
        spec.record_stride = stride;
        const auto traj = integrate(spec);
        return py::make_tuple(traj.times, traj.states);
      },
      py::arg("p0"), py::arg("horizon") = 10.0, py::arg("dt") = 1e-3, py::arg("stride") = 1);
  m.def("flow_rate", [](const Vector& p0) { return flow_rate(p0); }, py::arg("p0"));
  m.def("flow_bound", [](const Vector& p0, double t) { return flow_bound(p0, t); }, py::arg("p0"), py::arg("t"));

  m.def(
      "max_alpha",
      [](const Vector& p0, double epsilon, double q_bound) {
        return max_alpha(TheoremParams::from_initial(p0, epsilon, q_bound));
      },
      py::arg("p0"), py::arg("epsilon") = 0.5, py::arg("q_bound") = 2.0);
  m.def(
      "iterations_for",
      [](double target, const Vector& p0, double epsilon, double alpha, double q_bound) {
        return iterations_for(target, TheoremParams::from_initial(p0, epsilon, q_bound, alpha));
      },
      py::arg("target"), py::arg("p0"), py::arg("epsilon"), py::arg("alpha"), py::arg("q_bound") = 2.0);
  m.def(
      "corr_params",
      [](const Vector& p0, const Matrix& gamma, double epsilon) {
        const auto c = corr_params(p0, CorrelationMatrix(gamma), epsilon);
        py::dict out;
        out["valid"] = c.valid;
        out["delta_p"] = c.delta_p;
        out["delta_gamma"] = c.delta_gamma;
        out["nu"] = c.nu;
        out["c_star"] = c.c_star;
        out["max_alpha"] = c.valid ? py::cast(max_alpha_corr(c)) : py::none();
        return out;
      },
      py::arg("p0"), py::arg("gamma"), py::arg("epsilon") = 0.5);

  m.def(
      "entropic_step",
      [](const Vector& p, double alpha, const Vector& grad) {
        return entropic_step(ProbabilityVector(p), alpha, grad).values();
      },
      py::arg("p"), py::arg("alpha"), py::arg("grad"));
  m.def(
      "multiplicative_step",
      [](const Vector& p, double alpha) { return multiplicative_step(ProbabilityVector(p), alpha).values(); },
      py::arg("p"), py::arg("alpha"));
  m.def(
      "stdp_increment",
      [](const Vector& times, double t_prev, double t_next) { return stdp_increment(times, t_prev, t_next); },
      py::arg("times"), py::arg("t_prev"), py::arg("t_next"));

  m.def(
      "barycentric",
      [](const Vector& p) {
        const auto b = barycentric(p);
        return py::make_tuple(b.x, b.y);
      },
      py::arg("p"));
  m.def("scenario_names", &scenario_names);
  m.def(
      "run_scenario",
      [](const std::string& name, const std::string& output_dir, const std::map<std::string, std::string>& overrides,
         std::optional<std::uint64_t> seed, std::optional<std::size_t> threads) {
        ScenarioConfig cfg;
        cfg.scenario = name;
        cfg.output_dir = output_dir;
        cfg.seed = seed;
        cfg.threads = threads;
        for (const auto& kv : overrides) cfg.overrides.push_back(kv);
        std::ostringstream out;
        std::ostringstream err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_scenario(cfg, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("name"), py::arg("output_dir"), py::arg("overrides") = std::map<std::string, std::string>{},
      py::arg("seed") = py::none(), py::arg("threads") = py::none());
}
