#pragma once

// Fixed-capacity FIFO experience store with uniform minibatch sampling
// without replacement. Features are kept in single precision to halve the
// footprint of large buffers.

#include <algorithm>
#include <array>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "horizon/dqn/features.hpp"
#include "horizon/error.hpp"
#include "horizon/random.hpp"

namespace horizon::dqn {

struct Transition {
  std::array<float, kFeatureCount> state{};
  std::array<float, kFeatureCount> next_state{};
  std::int8_t action = 0;
  bool terminal = false;
  float reward = 0.0f;
};

inline std::array<float, kFeatureCount> to_stored(const FeatureVector& f) {
  std::array<float, kFeatureCount> out{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = static_cast<float>(f[i]);
  return out;
}

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 3'200'000) : capacity_(capacity) {
    if (capacity == 0) throw UsageError("replay capacity must be positive");
  }

  void push(const Transition& tr) {
    if (data_.size() < capacity_) {
      data_.push_back(tr);
    } else {
      data_[head_] = tr;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }

  // Element i in insertion order among the retained transitions (0 = oldest).
  const Transition& at(std::size_t i) const { return data_[(head_ + i) % data_.size()]; }

  // Floyd's algorithm: `count` distinct indices, each subset equally likely.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const {
    const std::size_t n = data_.size();
    if (count > n) throw UsageError("replay sample larger than buffer");
    std::vector<std::size_t> out;
    out.reserve(count);
    std::unordered_set<std::size_t> seen;
    seen.reserve(count * 2);
    for (std::size_t j = n - count; j < n; ++j) {
      const std::size_t r = static_cast<std::size_t>(rng.below(j + 1));
      const std::size_t pick = seen.count(r) ? j : r;
      seen.insert(pick);
      out.push_back(pick);
    }
    return out;
  }

  std::vector<const Transition*> sample(std::size_t count, Rng& rng) const {
    std::vector<const Transition*> out;
    out.reserve(count);
    for (std::size_t i : sample_indices(count, rng)) out.push_back(&at(i));
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

}  // namespace horizon::dqn
