#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rfasym {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// mt19937_64 with hand-rolled uniform/normal draws so that streams are
// reproducible independent of the standard library's distribution
// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // standard normal via Marsaglia's polar method
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Per-trial, per-purpose stream derivation: any single trial is reproducible
// in isolation from the master seed alone.
enum class Stream : std::uint64_t {
  Features = 1,
  Teacher = 2,
  Data = 3,
  Noise = 4,
  ZChannel = 5,
  Flips = 6,
  FreshEval = 7,
  Probe = 8,
};

inline Rng derive_stream(std::uint64_t master_seed, std::uint64_t trial, Stream stream) {
  std::uint64_t s = master_seed;
  splitmix64(s);
  s ^= 0x6a09e667f3bcc909ULL + trial;
  splitmix64(s);
  s ^= 0xbb67ae8584caa73bULL * (static_cast<std::uint64_t>(stream) + 1);
  const std::uint64_t seed = splitmix64(s);
  return Rng(seed);
}

}  // namespace rfasym
