#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace stirring {

/// Fenwick tree over non-negative integer weights: point update and
/// "find the leaf holding cumulative mass `target`" in O(log n).
class SumTree {
 public:
  SumTree() = default;
  explicit SumTree(std::size_t n) : weights_(n, 0), tree_(n + 1, 0) {
    top_bit_ = 1;
    while (top_bit_ * 2 <= n) top_bit_ *= 2;
  }

  std::size_t size() const { return weights_.size(); }
  std::int64_t total() const { return total_; }
  std::int64_t weight(std::size_t i) const { return weights_[i]; }

  void set(std::size_t i, std::int64_t w) {
    if (w < 0) throw std::invalid_argument("SumTree weights must be non-negative");
    const std::int64_t delta = w - weights_[i];
    if (delta == 0) return;
    weights_[i] = w;
    total_ += delta;
    for (std::size_t j = i + 1; j < tree_.size(); j += j & (~j + 1)) tree_[j] += delta;
  }

  /// Smallest i with prefix_sum(i) > target, for 0 <= target < total().
  /// On return `target` holds the offset inside leaf i, in [0, weight(i)).
  std::size_t find(std::int64_t& target) const {
    std::size_t pos = 0;
    for (std::size_t step = top_bit_; step > 0; step >>= 1) {
      const std::size_t next = pos + step;
      if (next < tree_.size() && tree_[next] <= target) {
        pos = next;
        target -= tree_[next];
      }
    }
    return pos;  // 0-based leaf index
  }

 private:
  std::vector<std::int64_t> weights_;
  std::vector<std::int64_t> tree_;
  std::int64_t total_ = 0;
  std::size_t top_bit_ = 0;
};

}  // namespace stirring
