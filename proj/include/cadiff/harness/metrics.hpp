#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cadiff/numerics/tensor.hpp"

namespace cadiff {

struct EpochMetrics {
  long step = 0;
  double return_mean = 0.0;
  double return_std = 0.0;
  double loss_state = 0.0;
  double loss_rew = 0.0;
  double loss_bs = 0.0;
  double loss_br = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double alpha = 0.0;
};

inline nlohmann::ordered_json to_json(const EpochMetrics& m) {
  return {{"step", m.step},         {"return_mean", m.return_mean}, {"return_std", m.return_std},
          {"loss_state", m.loss_state}, {"loss_rew", m.loss_rew},   {"loss_bs", m.loss_bs},
          {"loss_br", m.loss_br},   {"actor_loss", m.actor_loss},   {"critic_loss", m.critic_loss},
          {"alpha", m.alpha}};
}

inline EpochMetrics epoch_from_json(const nlohmann::json& j) {
  EpochMetrics m;
  m.step = j.at("step").get<long>();
  m.return_mean = j.at("return_mean").get<double>();
  m.return_std = j.at("return_std").get<double>();
  m.loss_state = j.at("loss_state").get<double>();
  m.loss_rew = j.at("loss_rew").get<double>();
  m.loss_bs = j.at("loss_bs").get<double>();
  m.loss_br = j.at("loss_br").get<double>();
  m.actor_loss = j.at("actor_loss").get<double>();
  m.critic_loss = j.at("critic_loss").get<double>();
  m.alpha = j.at("alpha").get<double>();
  return m;
}

/// Append-only JSON-lines writer; every record is flushed as one line.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path) : os_(path, std::ios::app) {
    if (!os_) throw Error("cannot open metrics file '" + path + "'");
  }

  void write(const EpochMetrics& m) {
    os_ << to_json(m).dump() << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
};

/// Reads a metrics stream; a truncated last line (interrupted write) is
/// skipped, malformed earlier lines are errors.
inline std::vector<EpochMetrics> read_metrics(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open metrics file '" + path + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);)
    if (!line.empty()) lines.push_back(line);
  std::vector<EpochMetrics> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      out.push_back(epoch_from_json(nlohmann::json::parse(lines[i])));
    } catch (const nlohmann::json::exception& e) {
      if (i + 1 == lines.size()) break;
      throw Error(detail::concat("metrics line ", i + 1, ": ", e.what()));
    }
  }
  return out;
}

/// Exponential moving average with the given half-life (in samples).
inline std::vector<double> ema_smooth(const std::vector<double>& xs, double half_life = 10.0) {
  if (!(half_life > 0)) throw Error("ema_smooth: half-life must be positive");
  const double keep = std::pow(0.5, 1.0 / half_life);
  std::vector<double> out;
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc = i == 0 ? xs[0] : keep * acc + (1.0 - keep) * xs[i];
    out.push_back(acc);
  }
  return out;
}

}  // namespace cadiff
