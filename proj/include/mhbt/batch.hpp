#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mhbt/error.hpp"
#include "mhbt/rng.hpp"

namespace mhbt {

/// A sorted set of m distinct record indices in [0, n).
class BatchIndex {
 public:
  using value_type = std::uint32_t;

  BatchIndex() = default;

  /// Validates and sorts; throws ContractViolation on duplicates or out-of-range values.
  BatchIndex(std::vector<value_type> indices, std::size_t n) : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    detail::require(!indices_.empty(), "BatchIndex: empty batch");
    detail::require(std::adjacent_find(indices_.begin(), indices_.end()) == indices_.end(),
                    "BatchIndex: duplicate index");
    detail::require(indices_.back() < n, "BatchIndex: index " + std::to_string(indices_.back()) +
                                             " out of range for n = " + std::to_string(n));
  }

  static BatchIndex full(std::size_t n) {
    BatchIndex b;
    b.indices_.resize(n);
    std::iota(b.indices_.begin(), b.indices_.end(), value_type{0});
    return b;
  }

  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  value_type operator[](std::size_t i) const { return indices_[i]; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }
  std::span<const value_type> view() const { return indices_; }

  bool operator==(const BatchIndex&) const = default;

 private:
  friend class BatchSampler;
  std::vector<value_type> indices_;
};

/// Uniform m-subsets of [0, n): Floyd's selection into a bitmap when n/64 is small next
/// to m, partial Fisher-Yates otherwise.
///
/// Keeps an identity permutation as scratch; swaps are undone after every draw so the
/// result depends only on the rng stream.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t m) : n_(n), m_(m) {
    detail::require(m >= 1 && m <= n, "sample_batch: need 1 <= m <= n, got m = " +
                                          std::to_string(m) + ", n = " + std::to_string(n));
    if (m_ == n_) return;
    if ((n_ >> 6) < m_ * 4) {
      bits_.assign((n_ + 63) >> 6, 0);
    } else {
      perm_.resize(n_);
      std::iota(perm_.begin(), perm_.end(), BatchIndex::value_type{0});
      swaps_.resize(m_);
    }
  }

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }

  /// Draws into `out`, reusing its storage. m = n yields the full set without touching rng.
  void draw(Rng& rng, BatchIndex& out) {
    auto& idx = out.indices_;
    if (m_ == n_) {
      if (idx.size() != n_) {
        idx.resize(n_);
        std::iota(idx.begin(), idx.end(), BatchIndex::value_type{0});
      }
      return;
    }
    if (!bits_.empty()) {
      draw_bitmap(rng, idx);
      return;
    }
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.index(n_ - i));
      std::swap(perm_[i], perm_[j]);
      swaps_[i] = static_cast<BatchIndex::value_type>(j);
    }
    idx.assign(perm_.begin(), perm_.begin() + static_cast<std::ptrdiff_t>(m_));
    for (std::size_t i = m_; i-- > 0;) std::swap(perm_[i], perm_[swaps_[i]]);
    std::sort(idx.begin(), idx.end());
  }

  BatchIndex draw(Rng& rng) {
    BatchIndex out;
    draw(rng, out);
    return out;
  }

 private:
  bool test_and_set(std::size_t i) {
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    const bool was = bits_[i >> 6] & bit;
    bits_[i >> 6] |= bit;
    return was;
  }

  // Floyd's selection into a bitmap, read back in ascending order: O(m + n/64).
  void draw_bitmap(Rng& rng, std::vector<BatchIndex::value_type>& idx) {
    for (std::size_t j = n_ - m_; j < n_; ++j) {
      const auto t = static_cast<std::size_t>(rng.index(j + 1));
      if (test_and_set(t)) test_and_set(j);
    }
    idx.resize(m_);
    std::size_t k = 0;
    for (std::size_t w = 0; w < bits_.size(); ++w) {
      for (std::uint64_t word = bits_[w]; word; word &= word - 1)
        idx[k++] = static_cast<BatchIndex::value_type>((w << 6) + static_cast<std::size_t>(std::countr_zero(word)));
      bits_[w] = 0;
    }
  }

  std::size_t n_;
  std::size_t m_;
  std::vector<BatchIndex::value_type> perm_;
  std::vector<BatchIndex::value_type> swaps_;
  std::vector<std::uint64_t> bits_;
};

/// One uniformly random m-subset of [0, n).
inline BatchIndex sample_batch(std::size_t n, std::size_t m, Rng& rng) {
  return BatchSampler(n, m).draw(rng);
}

}  // namespace mhbt
