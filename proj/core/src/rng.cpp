#include "confope/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace confope {

namespace {

// splitmix64 finalizer; good avalanche, cheap.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t key) : key_(key), gen_(mix64(key)) {}

double RandomStream::uniform01() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform_pos() {
  return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
}

double RandomStream::normal() {
  const double u1 = uniform_pos();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

int RandomStream::categorical(const Eigen::VectorXd& probs) {
  const double u = uniform01();
  double acc = 0.0;
  const int n = static_cast<int>(probs.size());
  for (int i = 0; i < n; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return n - 1;
}

std::uint64_t RandomStream::uniform_below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
  return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n)) %
         n;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index) {
  // FNV-1a over the tag, then splitmix rounds folding in master and index.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  h = mix64(h ^ mix64(master));
  h = mix64(h ^ mix64(index));
  return h;
}

}  // namespace confope
