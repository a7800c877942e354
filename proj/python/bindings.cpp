#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "quadhrl/harness.hpp"

namespace py = pybind11;
using namespace quadhrl;

namespace {

RunConfig config_from(const std::string& json_text, const std::vector<std::string>& overrides) {
  return apply_overrides(json_text.empty() ? RunConfig{} : config_from_json(json_text), overrides);
}

py::dict outcome_dict(const EpisodeOutcome& o) {
  py::dict d;
  d["fell"] = o.stats.fell;
  d["decisions"] = o.stats.decisions;
  d["ticks"] = o.stats.ticks;
  d["total_reward"] = o.stats.total_reward;
  d["energy"] = o.energy.failed ? py::object(py::none()) : py::object(py::float_(o.energy.value));
  d["front_lift_fraction"] = o.front_lift_fraction;
  d["stand_fraction"] = o.stand_fraction;
  d["decision_log"] = o.stats.decision_log;
  return d;
}

}  // namespace

PYBIND11_MODULE(_quadhrl, m) {
  m.doc() = "Hierarchical quadruped controller core";
  m.attr("__version__") = code_version();

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);

  m.def(
      "solve_qp",
      [](const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const Eigen::MatrixXd& A, const Eigen::VectorXd& lower,
         const Eigen::VectorXd& upper) {
        QpProblem p{P, q, A, lower, upper};
        p.validate();
        const QpSolution s = solve(p);
        py::dict d;
        d["x"] = s.x;
        d["y"] = s.y;
        d["status"] = to_string(s.status);
        d["iterations"] = s.iterations;
        return d;
      },
      py::arg("P"), py::arg("q"), py::arg("A"), py::arg("lower"), py::arg("upper"),
      "min 0.5 x'Px + q'x subject to lower <= Ax <= upper");

  m.def("primitive_table", [] {
    std::vector<std::pair<std::string, std::array<bool, kNumLegs>>> out;
    for (const auto& p : primitive_table()) out.emplace_back(std::string(p.name()), p.swing);
    return out;
  });

  m.def("toy_value_iteration", [](double gamma) { return Eigen::Matrix2d(ToyMdp::value_iteration(gamma)); });

  m.def("action_probabilities", [](const Eigen::VectorXd& q, double nu, const std::string& mode) {
    return action_probabilities(q, nu, parse_exploration(mode));
  }, py::arg("q"), py::arg("nu"), py::arg("mode") = "paper");

  m.def("default_config", [] { return config_to_json(RunConfig{}); });
  m.def(
      "resolve_config",
      [](const std::string& json_text, const std::vector<std::string>& overrides) {
        return config_to_json(config_from(json_text, overrides));
      },
      py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});
  m.def(
      "config_hash",
      [](const std::string& json_text, const std::vector<std::string>& overrides) {
        return config_hash(config_from(json_text, overrides));
      },
      py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "run_episode",
      [](const std::string& controller, const std::string& scenario, int seed_index, const std::string& json_text,
         const std::vector<std::string>& overrides) {
        const RunConfig cfg = config_from(json_text, overrides);
        const ScenarioSpec spec = scenario_preset(scenario, cfg.rollout.custom, cfg.bridge_belt_speed);
        py::gil_scoped_release release;
        const EpisodeOutcome o = run_episode(cfg, controller, spec.to_scenario(seed_index), seed_index);
        py::gil_scoped_acquire acquire;
        return outcome_dict(o);
      },
      py::arg("controller"), py::arg("scenario") = "static", py::arg("seed_index") = 0, py::arg("config_json") = "",
      py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "run_compare",
      [](const std::string& json_text, const std::vector<std::string>& overrides) {
        const RunConfig cfg = config_from(json_text, overrides);
        py::gil_scoped_release release;
        return run_compare(cfg);
      },
      py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});

  py::class_<TreadmillEnv>(m, "TreadmillEnv")
      .def(py::init<>())
      .def(
          "reset",
          [](TreadmillEnv& env, double belt_speed, double yaw_deg, bool bridge) {
            Scenario s = Scenario::both_belts(belt_speed, yaw_deg * 3.141592653589793 / 180.0);
            s.bridge = bridge;
            return env.reset(s);
          },
          py::arg("belt_speed") = 0.0, py::arg("yaw_deg") = 0.0, py::arg("bridge") = false)
      .def("step",
           [](TreadmillEnv& env, int action) {
             const StepResult r = env.step(action);
             return py::make_tuple(r.observation, r.reward, r.done, r.fell);
           })
      .def("observe", &TreadmillEnv::observe)
      .def_property_readonly("done", &TreadmillEnv::done)
      .def_property_readonly("obs_dim", &TreadmillEnv::obs_dim)
      .def_property_readonly("time", [](const TreadmillEnv& env) { return env.sim().time; })
      .def_property_readonly("body_position", [](const TreadmillEnv& env) { return Vec3(env.sim().robot.pose.position); })
      .def_property_readonly("contacts", [](const TreadmillEnv& env) { return env.sim().contact_flags(); });
}
