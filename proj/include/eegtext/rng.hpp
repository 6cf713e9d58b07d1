#ifndef EEGTEXT_RNG_HPP_
#define EEGTEXT_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace eegtext {

// Stable 64-bit mix for deriving per-stage seeds from one master seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  x ^= x >> 30; x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27; x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Seeded generator with portable derived distributions. std::mt19937_64's
// raw output sequence is pinned by the standard; the distribution helpers
// below are written out explicitly so results do not depend on the standard
// library's (implementation-defined) distribution code.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t raw() { return gen_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection-free modulo bias is negligible for
  // the small ranges used here, but do it properly anyway.
  uint64_t below(uint64_t n) {
    uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      uint64_t r = raw();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller (one value per call, spare cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do { u1 = uniform(); } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Seeded Fisher-Yates; std::shuffle is implementation-defined.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace eegtext

#endif  // EEGTEXT_RNG_HPP_
