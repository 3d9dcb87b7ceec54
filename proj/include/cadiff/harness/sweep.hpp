#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cadiff/harness/config.hpp"
#include "cadiff/harness/trainer.hpp"

namespace cadiff {

/// noise_scale x noise-intensity grid; every cell is trained on the same seeds.
struct SweepGrid {
  std::vector<double> noise_scales;
  std::vector<int> deltas;
  std::vector<std::uint64_t> seeds;  // empty: the base config's seed
};

namespace detail {

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (item.empty()) throw ConfigError("grid: empty entry in '" + key + "'");
    out.push_back(parse_value<T>(key, item));
  }
  if (out.empty()) throw ConfigError("grid: '" + key + "' has no values");
  return out;
}

}  // namespace detail

/// Grid file: `noise_scale = 0.1, 0.5, 1.0`,
/// `noise_intensity_of_observation_and_reward = 1, 2, 3` and optionally
/// `seeds = 0, 1, 2`. An axis left out takes the base config's value.
inline SweepGrid parse_grid(std::istream& is, const RunConfig& base) {
  SweepGrid g;
  int lineno = 0;
  for (std::string line; std::getline(is, line);) {
    ++lineno;
    line = detail::trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(detail::concat("grid line ", lineno, ": expected key = values"));
    const std::string key = detail::trim(line.substr(0, eq)), val = detail::trim(line.substr(eq + 1));
    if (key == "noise_scale") {
      g.noise_scales = detail::parse_list<double>(key, val);
    } else if (key == "noise_intensity_of_observation_and_reward") {
      g.deltas = detail::parse_list<int>(key, val);
    } else if (key == "seeds") {
      g.seeds = detail::parse_list<std::uint64_t>(key, val);
    } else {
      throw ConfigError(detail::concat("grid line ", lineno, ": unknown axis '", key, "'"));
    }
  }
  if (g.noise_scales.empty()) g.noise_scales = {base.noise_scale};
  if (g.deltas.empty()) g.deltas = {base.noise_intensity_of_observation_and_reward};
  if (g.seeds.empty()) g.seeds = {base.seed};
  return g;
}

inline SweepGrid load_grid(const std::string& path, const RunConfig& base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open grid file '" + path + "'");
  return parse_grid(is, base);
}

struct SweepCell {
  double noise_scale = 0.0;
  int delta = 0;
  std::vector<double> final_returns;  // one per seed, in grid seed order

  double mean() const {
    double s = 0.0;
    for (double v : final_returns) s += v;
    return final_returns.empty() ? 0.0 : s / static_cast<double>(final_returns.size());
  }
};

struct SweepResult {
  SweepGrid grid;
  std::vector<SweepCell> cells;  // row-major: noise scale, then delta

  const SweepCell& cell(std::size_t row, std::size_t col) const { return cells.at(row * grid.deltas.size() + col); }

  /// Noise-scale rows by noise-intensity columns of mean final return.
  std::string table() const {
    std::ostringstream os;
    os << "| noise_scale |";
    for (int d : grid.deltas) os << " delta=" << d << " |";
    os << "\n|---|";
    for (std::size_t c = 0; c < grid.deltas.size(); ++c) os << "---|";
    os << '\n' << std::fixed << std::setprecision(2);
    for (std::size_t r = 0; r < grid.noise_scales.size(); ++r) {
      os << "| " << grid.noise_scales[r] << " |";
      for (std::size_t c = 0; c < grid.deltas.size(); ++c) os << ' ' << cell(r, c).mean() << " |";
      os << '\n';
    }
    return os.str();
  }

  std::string csv() const {
    std::ostringstream os;
    os << "noise_scale,delta,seed,final_return\n" << std::setprecision(17);
    for (const auto& c : cells)
      for (std::size_t k = 0; k < c.final_returns.size(); ++k)
        os << c.noise_scale << ',' << c.delta << ',' << grid.seeds[k] << ',' << c.final_returns[k] << '\n';
    return os.str();
  }
};

inline std::string sweep_cell_name(double noise, int delta) {
  std::ostringstream os;
  os << "noise_" << noise << "_delta_" << delta;
  return os.str();
}

/// Trains every (noise scale, delta, seed) combination under `out_dir` and
/// writes table.md and results.csv there.
inline SweepResult sweep(const RunConfig& base, const SweepGrid& grid, const std::filesystem::path& out_dir,
                         const TrainOptions& opts = {}) {
  if (grid.noise_scales.empty() || grid.deltas.empty() || grid.seeds.empty())
    throw ConfigError("sweep: grid must be non-empty");
  SweepResult res{grid, {}};
  for (double noise : grid.noise_scales)
    for (int delta : grid.deltas) {
      SweepCell cell{noise, delta, {}};
      for (auto seed : grid.seeds) {
        RunConfig cfg = base;
        cfg.noise_scale = noise;
        cfg.noise_intensity_of_observation_and_reward = delta;
        cfg.seed = seed;
        const auto dir = out_dir / sweep_cell_name(noise, delta) / ("seed_" + std::to_string(seed));
        cell.final_returns.push_back(train(cfg, dir, opts).final_return);
      }
      res.cells.push_back(cell);
    }
  std::filesystem::create_directories(out_dir);
  std::ofstream(out_dir / "table.md") << res.table();
  std::ofstream(out_dir / "results.csv") << res.csv();
  return res;
}

}  // namespace cadiff
