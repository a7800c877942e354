#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "quadhrl/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

template <class T>
void override_if(std::vector<std::string>& out, const char* key, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_same_v<T, std::string>)
    out.push_back(std::string(key) + "=" + nlohmann::json(*v).dump());
  else if constexpr (std::is_same_v<T, bool>)
    out.push_back(std::string(key) + "=" + (*v ? "true" : "false"));
  else
    out.push_back(std::string(key) + "=" + std::to_string(*v));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical quadruped controller: training, evaluation and reports"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", quadhrl::code_version());

  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::string> controller, output, checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool dump_config = false;

  app.add_option("-c,--config", config_path, "JSON config file (defaults when omitted)")->check(CLI::ExistingFile);
  app.add_option("-s,--set", sets, "Override a config field, e.g. --set dqn.gamma=0.9")->take_all();
  app.add_option("--controller", controller, "standing|trotting|pacing|walking|heuristic|learned");
  app.add_option("-o,--output", output, "Output directory (relative paths go under $QUADHRL_OUTPUT_ROOT)");
  app.add_option("--checkpoint", checkpoint, "Checkpoint for the learned controller");
  app.add_option("--seed", seed, "Base seed");
  app.add_option("-j,--jobs", jobs, "Worker threads; results do not depend on this");
  app.add_flag("--dump-config", dump_config, "Print the resolved config and exit");

  auto* train = app.add_subcommand("train", "Train the learned high-level controller");
  std::optional<long> samples;
  bool resume = false;
  train->add_option("--samples", samples, "Total environment samples");
  train->add_flag("--resume", resume, "Continue from the checkpoint in the output directory");

  auto* eval = app.add_subcommand("eval", "Greedy evaluation on a scenario set");
  std::optional<std::string> eval_set;
  std::optional<int> eval_seeds;
  eval->add_option("--scenarios", eval_set, "training_grid|bridge|banana_peel|static");
  eval->add_option("--seeds", eval_seeds, "Seeds per scenario");

  auto* compare = app.add_subcommand("compare", "Energy and falls of several controllers over a grid");
  std::optional<std::string> cmp_controllers, sweep;
  std::optional<int> cmp_seeds;
  compare->add_option("--controllers", cmp_controllers, "Comma-separated controller names");
  compare->add_option("--sweep", sweep, "speed|yaw");
  compare->add_option("--seeds", cmp_seeds, "Seeds per cell");

  auto* rollout = app.add_subcommand("rollout", "One episode with per-tick contact log");
  std::optional<std::string> scenario;
  std::optional<int> seed_index, decisions;
  rollout->add_option("--scenario", scenario, "static|bridge|banana_peel|custom");
  rollout->add_option("--seed-index", seed_index, "Seed index for the initial perturbation");
  rollout->add_option("--decisions", decisions, "Stop after this many decisions (0 = full episode)");

  auto* export_qp = app.add_subcommand("export-qp", "Dump the force QP at a state as JSON");
  std::optional<int> prim, qp_decisions;
  std::optional<std::string> qp_scenario;
  export_qp->add_option("--primitive", prim, "Primitive id 0..8");
  export_qp->add_option("--decisions", qp_decisions, "Stand decisions simulated first");
  export_qp->add_option("--scenario", qp_scenario, "static|bridge|banana_peel|custom");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  quadhrl::RunConfig config;
  try {
    if (!config_path.empty()) config = quadhrl::load_config(config_path);
    std::vector<std::string> overrides = sets;
    override_if(overrides, "controller", controller);
    override_if(overrides, "output_dir", output);
    override_if(overrides, "checkpoint", checkpoint);
    override_if(overrides, "seed", seed);
    override_if(overrides, "jobs", jobs);
    override_if(overrides, "train.samples", samples);
    if (resume) overrides.push_back("train.resume=true");
    override_if(overrides, "eval.scenario_set", eval_set);
    override_if(overrides, "eval.seeds", eval_seeds);
    override_if(overrides, "compare.controllers", cmp_controllers);
    override_if(overrides, "compare.sweep", sweep);
    override_if(overrides, "compare.seeds", cmp_seeds);
    override_if(overrides, "rollout.scenario", scenario);
    override_if(overrides, "rollout.seed_index", seed_index);
    override_if(overrides, "rollout.max_decisions", decisions);
    override_if(overrides, "export_qp.primitive", prim);
    override_if(overrides, "export_qp.decisions", qp_decisions);
    override_if(overrides, "rollout.scenario", qp_scenario);
    config = quadhrl::apply_overrides(config, overrides);
  } catch (const quadhrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (dump_config) {
    std::cout << quadhrl::config_to_json(config) << "\n";
    return kExitOk;
  }

  try {
    if (*train) {
      const auto s = quadhrl::run_train(config, [](const quadhrl::RoundLog& r) {
        if (r.round % 10 == 0)
          std::cerr << "round " << r.round << " samples " << r.samples << " loss " << r.loss << " return "
                    << r.mean_return << "\n";
      });
      std::cout << s.checkpoint.string() << "\n";
    } else if (*eval) {
      std::cout << quadhrl::run_eval(config).string() << "\n";
    } else if (*compare) {
      std::cout << quadhrl::run_compare(config).string() << "\n";
    } else if (*rollout) {
      std::cout << quadhrl::run_rollout(config).string() << "\n";
    } else if (*export_qp) {
      std::cout << quadhrl::run_export_qp(config).string() << "\n";
    }
  } catch (const quadhrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const quadhrl::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n" << e.dump() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
