#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace ofspc {

/// SplitMix64: a tiny counter-style generator. Any (seed, stream ids)
/// tuple hashes to an independent starting state, so every sample or path
/// owns its own stream regardless of how work is scheduled.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state = 0) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Mixes a base seed with stream identifiers into a fresh generator state.
inline std::uint64_t stream_seed(std::uint64_t base, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = base;
  for (std::uint64_t id : ids) {
    SplitMix64 mix(h ^ (id * 0xD1B54A32D192ED03ULL));
    h = mix();
    h ^= SplitMix64(h + id)();
  }
  return h;
}

/// Standard-normal vectors from one stream.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double next() { return normal_(engine_); }

  Eigen::VectorXd next_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal_(engine_);
    return v;
  }

  /// Draw from N(0, L L^T).
  Eigen::VectorXd next_correlated(const Eigen::MatrixXd& factor) { return factor * next_vector(factor.cols()); }

 private:
  SplitMix64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace ofspc
