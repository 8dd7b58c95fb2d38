#pragma once

// Seeded randomness with platform-independent draws. std::mt19937_64 output
// is fully specified by the standard, the std distributions are not, so the
// draws below are written out to keep logs byte-identical across toolchains.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace crowdguard {

// FNV-1a over the parts, separated by 0xff, folded into `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::string_view> parts);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  // Uniform in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return unit() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(index(i))]);
    }
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(index(v.size()))];
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace crowdguard
