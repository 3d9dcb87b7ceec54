#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "cadiff/harness.hpp"

namespace fs = std::filesystem;
using namespace cadiff;

namespace {

constexpr int kExitVerify = 2;
constexpr int kExitConfig = 3;

void print_epoch(const EpochMetrics& m) {
  std::printf("step %7ld  return %8.2f +- %6.2f  L_state %.4f  L_rew %.4f  L_bs %.4f  L_br %.4f  alpha %.4f\n", m.step,
              m.return_mean, m.return_std, m.loss_state, m.loss_rew, m.loss_bs, m.loss_br, m.alpha);
  std::fflush(stdout);
}

fs::path default_run_dir(const std::string& config_path, const RunConfig& cfg, bool plain) {
  std::string name = fs::path(config_path).stem().string() + "_seed" + std::to_string(cfg.seed);
  if (plain) {
    name += "_plain_sac";
  } else if (cfg.ablate.any()) {
    name += "_" + cfg.ablate.str();
    for (auto& c : name)
      if (c == ',') c = '+';
  }
  return fs::path("runs") / name;
}

/// Accepts a run directory or its checkpoint/ subdirectory.
fs::path run_dir_of(const fs::path& ckpt) {
  if (fs::exists(ckpt / "config.txt")) return ckpt;
  if (fs::exists(ckpt.parent_path() / "config.txt")) return ckpt.parent_path();
  throw ConfigError("eval: no config.txt in '" + ckpt.string() + "' or its parent");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal diffusion denoising lab: oracles, training, evaluation and sweeps"};
  app.require_subcommand(1);

  std::string config_path, ablate_text, out_dir, grid_path, ckpt_dir, suite, report_path;
  std::optional<std::uint64_t> seed;
  bool plain = false;
  int episodes = 10;
  std::uint64_t verify_seed = 0;

  auto* train_cmd = app.add_subcommand("train", "Train one run and write metrics and a checkpoint");
  train_cmd->add_option("--config", config_path, "Key = value config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", seed, "Override the config seed");
  train_cmd->add_option("--ablate", ablate_text, "Comma list of no_bisim,no_reward_denoise,no_obs_denoise");
  train_cmd->add_flag("--plain-sac", plain, "Train the plain SAC baseline on raw observations");
  train_cmd->add_option("--out", out_dir, "Run directory (default runs/<config>_seed<N>...)");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved run with the deterministic policy");
  eval_cmd->add_option("--ckpt", ckpt_dir, "Run directory or its checkpoint/ subdirectory")->required();
  eval_cmd->add_option("--episodes", episodes, "Number of evaluation episodes")->required();
  eval_cmd->add_option("--seed", seed, "Environment seed (default: the run's evaluation stream)");

  auto* verify_cmd = app.add_subcommand("verify", "Run a randomized oracle suite");
  verify_cmd->add_option("--suite", suite, "wasserstein, bisim, theorem1, corollary1, diffusion, autodiff or all")
      ->required();
  verify_cmd->add_option("--seed", verify_seed, "Base seed of the suite instances");
  verify_cmd->add_option("--report", report_path, "Also write the JSON report to this file");

  auto* sweep_cmd = app.add_subcommand("sweep", "Train a noise_scale x noise-intensity grid");
  sweep_cmd->add_option("--config", config_path, "Base config file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--grid", grid_path, "Grid file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", out_dir, "Output directory (default runs/sweep_<config>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train_cmd) {
      RunConfig cfg = load_config(config_path);
      if (seed) cfg.seed = *seed;
      if (!ablate_text.empty()) cfg.ablate = parse_ablations(ablate_text);
      cfg.validate();
      const fs::path dir = out_dir.empty() ? default_run_dir(config_path, cfg, plain) : fs::path(out_dir);
      TrainOptions opts;
      opts.plain_sac = plain;
      opts.on_epoch = print_epoch;
      const auto r = train(cfg, dir, opts);
      std::printf("run %s  final_return %.4f  (%.1f s)\n", dir.string().c_str(), r.final_return, r.seconds);
      return 0;
    }
    if (*eval_cmd) {
      const auto st = evaluate_run(run_dir_of(ckpt_dir), episodes, seed);
      nlohmann::ordered_json j{{"episodes", episodes}, {"return_mean", st.mean}, {"return_std", st.std}};
      std::cout << j.dump() << '\n';
      return 0;
    }
    if (*verify_cmd) {
      VerifyOptions o;
      o.seed = verify_seed;
      o.mixture.seed = verify_seed;
      std::vector<std::string> names;
      if (suite == "all") {
        names = verify_suite_names();
      } else {
        names = {suite};
      }
      nlohmann::ordered_json out = nlohmann::ordered_json::array();
      bool ok = true;
      for (const auto& name : names) {
        const auto rep = run_verify_suite(name, o);
        out.push_back(to_json(rep));
        ok = ok && rep.pass();
        for (const auto& c : rep.checks)
          for (auto s : c.violating_seeds)
            std::cerr << "violation: suite " << rep.suite << ", check " << c.name << ", instance seed " << s << '\n';
      }
      const auto doc = names.size() == 1 ? out[0] : out;
      std::cout << doc.dump(2) << '\n';
      if (!report_path.empty()) std::ofstream(report_path) << doc.dump(2) << '\n';
      return ok ? 0 : kExitVerify;
    }
    if (*sweep_cmd) {
      const RunConfig base = load_config(config_path);
      base.validate();
      const SweepGrid grid = load_grid(grid_path, base);
      const fs::path dir = out_dir.empty() ? fs::path("runs") / ("sweep_" + fs::path(config_path).stem().string())
                                           : fs::path(out_dir);
      TrainOptions opts;
      const auto res = sweep(base, grid, dir, opts);
      std::cout << res.table();
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
