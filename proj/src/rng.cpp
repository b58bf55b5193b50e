#include "cryptovit/rng.hpp"

#include <cmath>

#include "cryptovit/common.hpp"

namespace cryptovit::rng {

namespace {

// 32-byte ChaCha key from (seed, domain): state = seed ^ fnv1a64(domain),
// then four splitmix64 outputs little-endian.
std::array<uint8_t, 32> expand_key(uint64_t seed, std::string_view domain) {
  std::array<uint8_t, 32> key{};
  uint64_t state = seed ^ fnv1a64(domain);
  for (int w = 0; w < 4; ++w) {
    uint64_t v = splitmix64(state);
    for (int i = 0; i < 8; ++i) key[8 * w + i] = static_cast<uint8_t>(v >> (8 * i));
  }
  return key;
}

chacha::Stream make_stream(uint64_t seed, std::string_view domain) {
  auto key = expand_key(seed, domain);
  std::array<uint8_t, 12> nonce{};  // all zero; the key carries the domain
  return chacha::Stream(key.data(), nonce.data());
}

}  // namespace

Rng::Rng(uint64_t seed, std::string_view domain) : stream_(make_stream(seed, domain)) {}

uint64_t Rng::next_u64() {
  uint64_t lo = next_u32();
  uint64_t hi = next_u32();
  return lo | (hi << 32);
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  double u2 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

std::vector<uint32_t> Rng::permutation(uint32_t n) {
  std::vector<uint32_t> p(n);
  for (uint32_t i = 0; i < n; ++i) p[i] = i;
  shuffle(p);
  return p;
}

}  // namespace cryptovit::rng
