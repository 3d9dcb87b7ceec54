// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance [work_dir] [--only 1,2,...]
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "cadiff/harness.hpp"

using namespace cadiff;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void line(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("[%s] %2d %-28s %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string seeds_of(const SuiteCheck& c) {
  if (c.violating_seeds.empty()) return "";
  std::string s = " violating seeds:";
  for (auto v : c.violating_seeds) s += " " + std::to_string(v);
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

constexpr int kSeeds = 5;

struct Returns {
  double v[kSeeds] = {};
  double mean() const {
    double s = 0;
    for (double x : v) s += x;
    return s / kSeeds;
  }
};

Returns train_seeds(const fs::path& root, const std::string& tag, const std::string& ablate, bool plain) {
  Returns r;
  for (int s = 0; s < kSeeds; ++s) {
    RunConfig cfg;  // defaults: NoisyPointMass-P, noise 0.5, 20k steps
    cfg.seed = static_cast<std::uint64_t>(s);
    cfg.ablate = parse_ablations(ablate);
    TrainOptions o;
    o.plain_sac = plain;
    const auto res = train(cfg, root / tag / ("seed_" + std::to_string(s)), o);
    r.v[s] = res.final_return;
    std::printf("       %-18s seed %d  final_return %8.3f  (%.0f s)\n", tag.c_str(), s, res.final_return, res.seconds);
    std::fflush(stdout);
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path root = fs::temp_directory_path() / "cadiff_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
    } else {
      root = argv[i];
    }
  }
  auto want = [&](int id) { return only.empty() || only.count(id); };
  const VerifyOptions vo;  // acceptance sizes and tolerances are the defaults

  try {
    if (want(1) || want(2) || want(3)) {
      const auto t1 = verify_theorem1(vo);
      const auto& b = t1.check("value_difference_bound");
      const double secs = t1.check("runtime_seconds").measured;
      if (want(1))
        line(1, t1.pass(), "value-difference bound",
             fmt("%zu MDPs, max C_r|Vi-Vj| - d = %.3e (tol %.0e), %.2f s (limit %.0f s)%s", b.instances, b.measured,
                 vo.value_tol, secs, vo.theorem_seconds, seeds_of(b).c_str()));
      const auto bs = verify_bisim(vo);
      const auto& rate = bs.check("contraction_rate");
      const auto& diam = bs.check("diameter");
      if (want(2))
        line(2, rate.pass(), "contraction ratio",
             fmt("max ratio %.6f <= %.6f over %zu MDPs%s", rate.measured, rate.bound, rate.instances,
                 seeds_of(rate).c_str()));
      if (want(3))
        line(3, diam.pass(), "diameter bound",
             fmt("worst max_ij d - bound = %.3e (tol %.0e)%s", diam.measured - diam.bound + vo.diameter_tol,
                 vo.diameter_tol, seeds_of(diam).c_str()));
    }
    if (want(4)) {
      const auto c = verify_corollary1(vo);
      const auto& b = c.check("model_error_bound");
      line(4, c.pass(), "model-error bound",
           fmt("%zu pairs, worst lhs - rhs = %.3e (tol %.0e)%s", b.instances, b.measured - b.bound + vo.model_tol,
               vo.model_tol, seeds_of(b).c_str()));
    }
    if (want(5)) {
      const auto w = verify_wasserstein(vo);
      std::string detail;
      for (const auto& c : w.checks)
        detail += fmt("%s %.3e/%.3e; ", c.name.c_str(), c.measured, c.bound) + seeds_of(c);
      line(5, w.pass(), "Wasserstein oracles", detail);
    }
    if (want(6)) {
      const auto a = verify_autodiff(vo);
      const auto& g = a.check("relative_error");
      line(6, a.pass(), "autodiff gradient checks",
           fmt("%zu checks, max relative error %.3e (< %.0e)%s", g.instances, g.measured, vo.gradcheck_tol,
               seeds_of(g).c_str()));
    }
    if (want(7)) {
      const auto d = verify_diffusion(vo);
      line(7, d.pass(), "ADM mixture denoising",
           fmt("W1 ratio %.3f (<= %.1f), round trip %.2e (<= %.0e), %.0f s (limit %.0f s)",
               d.check("w1_ratio").measured, vo.mixture_ratio, d.check("oracle_roundtrip").measured,
               vo.mixture_roundtrip, d.check("runtime_seconds").measured, vo.mixture_seconds));
    }
    if (want(8) || want(9)) {
      const auto full = train_seeds(root, "cadiff", "none", false);
      if (want(8)) {
        const auto plain = train_seeds(root, "plain_sac", "none", true);
        int wins = 0;
        std::string per;
        for (int s = 0; s < kSeeds; ++s) {
          wins += full.v[s] > plain.v[s];
          per += fmt(" %+.2f", full.v[s] - plain.v[s]);
        }
        line(8, wins >= kSeeds - 1, "CaDiff+SAC beats plain SAC",
             fmt("%d/%d paired wins (need >= 4); mean %.2f vs %.2f; per-seed diff:%s", wins, kSeeds, full.mean(),
                 plain.mean(), per.c_str()));
      }
      if (want(9)) {
        const auto no_obs = train_seeds(root, "no_obs_denoise", "no_obs_denoise", false);
        const auto no_rew = train_seeds(root, "no_reward_denoise", "no_reward_denoise", false);
        int inversions = 0;
        for (int s = 0; s < kSeeds; ++s) inversions += (full.v[s] - no_obs.v[s]) < (full.v[s] - no_rew.v[s]);
        const double d_obs = full.mean() - no_obs.mean(), d_rew = full.mean() - no_rew.mean();
        line(9, d_obs >= d_rew || inversions <= 1, "ablation ordering",
             fmt("mean degradation no_obs_denoise %.2f vs no_reward_denoise %.2f; %d seed inversion(s) (tolerance 1)",
                 d_obs, d_rew, inversions));
      }
    }
    if (want(10)) {
      RunConfig cfg;
      cfg.total_steps = 3000;
      cfg.steps_per_epoch = 500;
      cfg.seed = 3;
      train(cfg, root / "determinism_a");
      train(cfg, root / "determinism_b");
      const auto a = slurp(root / "determinism_a" / "metrics.jsonl");
      const auto b = slurp(root / "determinism_b" / "metrics.jsonl");
      line(10, !a.empty() && a == b, "determinism",
           fmt("two 3000-step runs, metrics files %zu and %zu bytes, %s", a.size(), b.size(),
               a == b ? "identical" : "differ"));
    }
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %d failing criteria\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
