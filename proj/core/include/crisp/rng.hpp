#pragma once
#include <cmath>
#include <cstdint>
#include <string_view>

namespace crisp {

// Counter-based generator: each draw is a stateless hash of
// (seed, stream-id, counter), so any column of a synthetic dataset can be
// reproduced independently.  Streams are named; the id is an FNV-1a hash of
// the name.  Documented streams: "x", "y0", "y1", "t", "oracle", "fold",
// "instance", plus task-derived streams of the experiment runner.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view stream)
      : key_(mix(seed ^ fnv1a(stream))), ctr_(0) {}

  std::uint64_t next_u64() { return mix(key_ + (++ctr_) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform draw in the open interval (0,1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes two uniforms.
  double normal() {
    double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t ctr_;
};

}  // namespace crisp
