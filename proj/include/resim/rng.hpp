#pragma once

#include <cmath>
#include <cstdint>

namespace resim {

// Counter-based generator built on the splitmix64 finalizer. All stochastic
// behavior in the engine flows through this so runs are reproducible across
// platforms and thread counts.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  return splitmix64(a ^ (0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2) + splitmix64(b)));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x5851f42d4c957f2dull)) {}

  // Independent stream keyed on (seed, stream id); used for per-face /
  // per-frame draws that must not depend on call order.
  static Rng keyed(uint64_t seed, uint64_t stream) { return Rng(hash_combine(seed, stream)); }

  uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  // [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) { return int(next_u64() % uint64_t(n)); }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; two uniforms per draw, no cached state.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  uint64_t state_;
};

}  // namespace resim
