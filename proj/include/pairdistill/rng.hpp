#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace pairdistill {

// Seed derivation and sampling utilities.
//
// All distribution transforms are implemented here on top of
// std::mt19937_64 (whose output sequence is fixed by the standard), so a
// given seed produces the same draws on every platform. Parallel kernels
// derive one sub-seed per work item; results are independent of thread
// count and scheduling.

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Sub-seed for work item `item` of stream `tag` under a master seed.
inline constexpr std::uint64_t derive_seed(std::uint64_t master,
                                           std::uint64_t tag,
                                           std::uint64_t item) {
  return splitmix64(splitmix64(master ^ tag) ^ item);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master,
                                           std::uint64_t tag) {
  return splitmix64(master ^ tag);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1); rejects exact zeros so log/logit transforms stay finite.
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  // Standard normal via Box-Muller (sine twin discarded to keep the
  // stream layout one-draw-per-call predictable).
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double stddev) { return stddev * normal(); }

  // Logistic(0, scale) via inverse CDF. scale == 0 collapses to the point
  // mass at zero without consuming a draw, so noise-free worlds do not
  // perturb the stream.
  double logistic(double scale) {
    if (scale == 0.0) return 0.0;
    const double u = uniform_open();
    return scale * std::log(u / (1.0 - u));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  template <typename Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

// Stream tags namespacing the independent random streams of a run.
namespace stream {
inline constexpr std::uint64_t world = fnv1a64("world");
inline constexpr std::uint64_t draws = fnv1a64("draws");
inline constexpr std::uint64_t prompt = fnv1a64("prompt");
inline constexpr std::uint64_t pairs = fnv1a64("pairs");
inline constexpr std::uint64_t cross_pairs = fnv1a64("cross_pairs");
inline constexpr std::uint64_t train = fnv1a64("train");
inline constexpr std::uint64_t split = fnv1a64("split");
inline constexpr std::uint64_t gradcheck = fnv1a64("gradcheck");
inline constexpr std::uint64_t bootstrap = fnv1a64("bootstrap");
inline constexpr std::uint64_t replicate = fnv1a64("replicate");
}  // namespace stream

}  // namespace pairdistill
