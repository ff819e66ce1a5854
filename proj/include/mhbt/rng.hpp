#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Core>

namespace mhbt {

/// Seedable generator with derivable per-stream children.
///
/// Streams are derived from (root seed, stream index) only, so adding or removing
/// chains never perturbs the draws of the others.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {
    std::seed_seq seq = make_seq(seed, 0, 0);
    engine_.seed(seq);
  }

  /// Child generator for stream `index` of `root_seed`.
  static Rng stream(std::uint64_t root_seed, std::uint64_t index) {
    Rng r;
    r.seed_ = root_seed;
    std::seed_seq seq = make_seq(root_seed, index + 1, 0x5eed);
    r.engine_.seed(seq);
    return r;
  }

  /// Child of this generator's root seed; does not consume draws from *this.
  Rng split(std::uint64_t index) const { return stream(seed_, index); }

  std::uint64_t seed() const { return seed_; }

  /// Uniform on [0, 1).
  double uniform() { return unif_(engine_); }

  /// Uniform integer in [0, bound), by Lemire's multiply-and-reject method.
  std::uint64_t index(std::uint64_t bound) {
    __extension__ using wide = unsigned __int128;
    wide prod = static_cast<wide>(engine_()) * bound;
    auto low = static_cast<std::uint64_t>(prod);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        prod = static_cast<wide>(engine_()) * bound;
        low = static_cast<std::uint64_t>(prod);
      }
    }
    return static_cast<std::uint64_t>(prod >> 64);
  }

  double normal() { return normal_(engine_); }

  bool coin() { return uniform() < 0.5; }

  template <typename Derived>
  void fill_normal(Eigen::DenseBase<Derived>& out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out.derived().coeffRef(i) = normal();
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::seed_seq make_seq(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt) {
    return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(stream),
                         static_cast<std::uint32_t>(stream >> 32),
                         static_cast<std::uint32_t>(salt)};
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace mhbt
