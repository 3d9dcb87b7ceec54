#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "cadiff/numerics/param_set.hpp"

namespace cadiff {

// Layout: "CDF1", version u32, count u32, then per entry: name length u16,
// name bytes, rank u8, dims u32 each, f64 payload. All little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {
template <typename T>
void put_le(std::ostream& os, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) os.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::istream& is) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    int c = is.get();
    if (c == EOF) throw Error("checkpoint: truncated file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return static_cast<T>(v);
}
}  // namespace detail

inline void write_checkpoint(std::ostream& os, const std::map<std::string, Tensor>& tensors) {
  os.write("CDF1", 4);
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xffff) throw Error("checkpoint: parameter name too long");
    if (t.rank() > 0xff) throw Error("checkpoint: rank too large");
    detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape) detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (double x : t.data) detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(x));
  }
}

inline std::map<std::string, Tensor> read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "CDF1") throw Error("checkpoint: bad magic");
  auto version = detail::get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw Error(detail::concat("checkpoint: unsupported version ", version));
  auto count = detail::get_le<std::uint32_t>(is);
  std::map<std::string, Tensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto len = detail::get_le<std::uint16_t>(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw Error("checkpoint: truncated name");
    auto rank = detail::get_le<std::uint8_t>(is);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = detail::get_le<std::uint32_t>(is);
      n *= d;
    }
    std::vector<double> data(n);
    for (auto& x : data) x = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
    out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

inline void save_params(const std::filesystem::path& path, const ParamSet& ps) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(os, ps.values);
}

/// Loads values into an initialized ParamSet; names and shapes must match.
inline void load_params(const std::filesystem::path& path, ParamSet& ps) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open " + path.string());
  auto tensors = read_checkpoint(is);
  if (tensors.size() != ps.values.size())
    throw Error(detail::concat("checkpoint: ", path.string(), " holds ", tensors.size(), " tensors, expected ",
                               ps.values.size()));
  for (auto& [name, t] : ps.values) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("checkpoint: missing parameter '" + name + "'");
    if (it->second.shape != t.shape)
      throw Error("checkpoint: shape mismatch for '" + name + "': " + it->second.shape_str() + " vs " + t.shape_str());
    t = it->second;
  }
}

}  // namespace cadiff
