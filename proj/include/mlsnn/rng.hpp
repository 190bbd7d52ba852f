#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace mlsnn {

// splitmix64: used both as a stream-derivation mix and to seed the generator.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from a root seed and a stream tag.
// All run-internal randomness (init, shuffles, data synthesis) flows from the
// single run seed through this, so resuming at epoch k replays bit-exactly.
inline uint64_t derive_seed(uint64_t root, uint64_t stream) {
  return splitmix64(root ^ splitmix64(stream + 0x517cc1b727220a95ull));
}

// Deterministic xoshiro256** generator with hand-rolled float draws, so
// results are identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = (x = splitmix64(x));
  }

  uint64_t next_u64() {
    auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
    uint64_t result = rotl(s_[1] * 5, 7) * 9;
    uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 24 bits of mantissa (exact float).
  float uniform01() { return static_cast<float>(next_u64() >> 40) * 0x1p-24f; }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform01(); }

  // Integer in [0, n) without modulo bias (n > 0).
  uint64_t below(uint64_t n) {
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Box-Muller; deterministic, no libm distribution objects.
  float normal(float mean = 0.0f, float stddev = 1.0f) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    float u1 = 0.0f;
    do {
      u1 = uniform01();
    } while (u1 <= 1e-12f);
    float u2 = uniform01();
    float r = std::sqrt(-2.0f * std::log(u1));
    float a = 6.28318530717958647692f * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return mean + stddev * (r * std::cos(a));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.empty()) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  uint64_t s_[4];
  float spare_ = 0.0f;
  bool have_spare_ = false;
};

}  // namespace mlsnn
