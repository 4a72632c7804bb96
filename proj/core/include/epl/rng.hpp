#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace epl {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// independent stream seed for (master seed, index); stable across platforms
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s = a ^ (index * 0xD1B54A32D192ED03ULL);
  splitmix64(s);
  return splitmix64(s);
}

// mt19937_64 with hand-rolled conversions so draws do not depend on the standard library's distributions
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  Rng(std::uint64_t master, std::uint64_t index) : eng_(stream_seed(master, index)) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // index drawn with the given probabilities (assumed to sum to one)
  int categorical(std::span<const double> p) {
    const double u = uniform();
    double acc = 0.0;
    for (size_t i = 0; i + 1 < p.size(); ++i) {
      acc += p[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(p.size()) - 1;
  }
  std::uint64_t next() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace epl
