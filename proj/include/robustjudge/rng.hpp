#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "robustjudge/errors.hpp"

namespace robustjudge {

// mt19937_64 output is pinned by the standard, but std::shuffle and the
// distribution adaptors are not. Everything that must reproduce across
// toolchains goes through the helpers below instead.

// Unbiased draw from [0, n) by rejection on the top of the 64-bit range.
inline std::uint64_t bounded_uniform(std::mt19937_64& gen, std::uint64_t n) {
  if (n == 0) throw BadParams("bounded_uniform: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Fisher-Yates over the index range [0, total).
inline std::vector<std::size_t> shuffled_indices(std::size_t total,
                                                 std::mt19937_64& gen) {
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  for (std::size_t i = 0; i + 1 < total; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(
        bounded_uniform(gen, static_cast<std::uint64_t>(total - i)));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

// First n of a seeded shuffle, re-sorted so callers see input order.
inline std::vector<std::size_t> sample_indices(std::size_t total, std::size_t n,
                                               std::uint64_t seed) {
  if (n > total)
    throw SampleTooLarge("sample_indices: requested " + std::to_string(n) +
                         " of " + std::to_string(total));
  std::mt19937_64 gen(seed);
  std::vector<std::size_t> idx = shuffled_indices(total, gen);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// FNV-1a, used to derive per-cell seeds from the run seed plus cell labels.
// Ordering of feed() calls is part of the derivation.
class SeedMixer {
 public:
  explicit SeedMixer(std::uint64_t seed) : h_(0xcbf29ce484222325ull) {
    feed_u64(seed);
  }

  SeedMixer& feed(const std::string& s) {
    for (unsigned char c : s) step(c);
    step(0x1f);  // field separator so ("ab","c") != ("a","bc")
    return *this;
  }

  SeedMixer& feed_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) step(static_cast<unsigned char>(v >> (8 * i)));
    return *this;
  }

  std::uint64_t value() const { return h_; }

 private:
  void step(unsigned char c) {
    h_ ^= c;
    h_ *= 0x100000001b3ull;
  }
  std::uint64_t h_;
};

}  // namespace robustjudge
