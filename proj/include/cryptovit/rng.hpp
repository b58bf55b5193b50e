#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "cryptovit/chacha20.hpp"

namespace cryptovit::rng {

// Deterministic experiment randomness (dataset synthesis, weight init,
// batch order, poison selection, shard assignment). Seeded from a u64 and
// a domain string; expansion rule in docs/FORMATS.md. Client keys use the
// keyspace module instead, never this.
class Rng {
 public:
  Rng(uint64_t seed, std::string_view domain);

  uint8_t next_byte() { return stream_.next_byte(); }
  uint32_t next_u32() { return stream_.next_u32(); }
  uint64_t next_u64();

  // unbiased in {0..n-1}
  uint32_t uniform_below(uint32_t n) { return stream_.uniform_below(n); }

  // in [0,1) with 53 random bits
  double uniform01();

  // in [lo, hi)
  double uniform(double lo, double hi);

  // standard normal via Box-Muller (polar form avoided: tan-free basic
  // form keeps the draw count fixed at two uniforms per pair)
  double gaussian();
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_below(static_cast<uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Seeded full shuffle of {0..n-1}; callers taking a prefix of the result
  // get nested subsets for increasing counts, which the poisoning sweep
  // relies on.
  std::vector<uint32_t> permutation(uint32_t n);

 private:
  chacha::Stream stream_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cryptovit::rng
