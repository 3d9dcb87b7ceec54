#pragma once

#include <unordered_set>
#include <vector>

#include "cadiff/numerics/random.hpp"
#include "cadiff/numerics/tensor.hpp"

namespace cadiff {

/// One replay record. Windows are flattened, left-padded observation
/// histories ending at o_{t-1}, o_t and o_{t+1}.
struct Transition {
  std::vector<double> window_prev, window, window_next;
  std::vector<double> action_prev, action;
  double reward = 0.0;
  bool done = false;  // true only for terminal states (never for time limits)
};

/// Fixed-capacity FIFO ring of transitions with uniform sampling without
/// replacement inside a batch.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error("ReplayBuffer: capacity must be positive");
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t pushed() const { return pushed_; }

  /// Inserts a complete record; at capacity the oldest record is overwritten.
  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
    ++pushed_;
  }

  /// Record i in insertion order (0 = oldest retained).
  const Transition& at(std::size_t i) const { return data_.at((head_ + i) % data_.size()); }

  /// n distinct indices (Floyd's algorithm); only committed records are eligible.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    const std::size_t m = data_.size();
    if (n > m) throw Error(detail::concat("ReplayBuffer: batch of ", n, " from ", m, " records"));
    std::vector<std::size_t> out;
    out.reserve(n);
    std::unordered_set<std::size_t> chosen;
    for (std::size_t j = m - n; j < m; ++j) {
      const std::size_t r = std::uniform_int_distribution<std::size_t>(0, j)(rng);
      const std::size_t pick = chosen.count(r) ? j : r;
      chosen.insert(pick);
      out.push_back(pick);
    }
    return out;
  }

  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const {
    std::vector<const Transition*> out;
    for (auto i : sample_indices(n, rng)) out.push_back(&data_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::uint64_t pushed_ = 0;
  std::vector<Transition> data_;
};

}  // namespace cadiff
