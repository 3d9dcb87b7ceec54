#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <string>

#include "cadiff/numerics/tensor.hpp"

namespace cadiff {

using GradMap = std::map<std::string, Tensor>;

/// Named trainable parameters plus the Adam shadow moments. Each network
/// (score nets, encoder, actor, critics) owns exactly one ParamSet.
struct ParamSet {
  std::map<std::string, Tensor> values;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
  std::uint64_t step_count = 0;

  void add(const std::string& name, Tensor t) {
    if (values.count(name)) throw Error("ParamSet: duplicate parameter '" + name + "'");
    first_moment[name] = Tensor::zeros_like(t);
    second_moment[name] = Tensor::zeros_like(t);
    values.emplace(name, std::move(t));
  }

  bool contains(const std::string& name) const { return values.count(name) != 0; }

  const Tensor& at(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw Error("ParamSet: unknown parameter '" + name + "'");
    return it->second;
  }

  Tensor& at(const std::string& name) {
    auto it = values.find(name);
    if (it == values.end()) throw Error("ParamSet: unknown parameter '" + name + "'");
    return it->second;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : values) n += t.size();
    return n;
  }

  /// FNV-1a over names and raw value bits; used to assert which networks a
  /// gradient step touched.
  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
      }
    };
    for (const auto& [name, t] : values) {
      mix(name.data(), name.size());
      mix(t.data.data(), t.data.size() * sizeof(double));
    }
    return h;
  }

  /// Copies values (not moments) from another set with identical layout.
  void copy_values_from(const ParamSet& other) {
    for (auto& [name, t] : values) t.data = other.at(name).data;
  }
};

}  // namespace cadiff
