// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include "toxred/errors.hpp"

namespace toxred::rng {

// Counter-based deterministic RNG. Every draw is a pure function of
// (key, counter), so traces are reproducible regardless of scheduling and
// identical across platforms. The mixer is the splitmix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// FNV-1a over bytes, finalized through splitmix64.
inline std::uint64_t hash_bytes(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t key) : key_(key) {}

  template <typename... Parts>
  static KeyedRng keyed(std::uint64_t seed, Parts... parts) {
    std::uint64_t key = splitmix64(seed);
    ((key = mix(key, static_cast<std::uint64_t>(parts))), ...);
    return KeyedRng(key);
  }

  std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n). Rejection-sampled so the distribution is exact.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) raise(ErrorKind::kInvalidArgument, "KeyedRng::below(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Chooses k distinct indices out of [0, m) via partial Fisher-Yates,
  // returned in ascending order.
  std::vector<std::size_t> sample_indices(std::size_t m, std::size_t k) {
    if (k > m) raise(ErrorKind::kInvalidArgument, "sample_indices: k > m");
    std::vector<std::size_t> pool(m);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(m - i));
      std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  // Categorical draw over non-negative weights summing to s > 0.
  std::size_t categorical(std::span<const double> probs) {
    if (probs.empty()) raise(ErrorKind::kInvalidArgument, "categorical: empty");
    const double u = next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace toxred::rng
