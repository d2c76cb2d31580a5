#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace confope {

// Deterministic random stream. All sampling in the library goes through this
// class so that results are reproducible from a seed alone, independent of
// platform std::distribution implementations and of how work is split across
// threads. Child streams are derived by hashing (master seed, tag, index);
// derivation never consumes generator state.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key);

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  // Uniform on (0, 1], never zero (safe to pass to log).
  double uniform_pos();
  // Standard normal via Box-Muller; consumes exactly two uniforms per call,
  // no caching, so the draw sequence is position-independent.
  double normal();
  // Index sampled from a probability vector by CDF inversion.
  int categorical(const Eigen::VectorXd& probs);
  // Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n);

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 gen_;
};

// Hash-derived child seed for (master, tag, index). Stable across runs and
// platforms; used to give every rollout / replication / fold its own stream.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index);

inline RandomStream derive_stream(std::uint64_t master, std::string_view tag,
                                  std::uint64_t index) {
  return RandomStream(derive_seed(master, tag, index));
}

}  // namespace confope
