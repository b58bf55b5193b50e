#include "cryptovit/chacha20.hpp"

#include <cstring>

#include "cryptovit/common.hpp"

namespace cryptovit::chacha {

namespace {

inline uint32_t rotl(uint32_t v, int c) { return (v << c) | (v >> (32 - c)); }

inline uint32_t load_le32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline void store_le32(uint8_t* p, uint32_t v) {
  p[0] = static_cast<uint8_t>(v);
  p[1] = static_cast<uint8_t>(v >> 8);
  p[2] = static_cast<uint8_t>(v >> 16);
  p[3] = static_cast<uint8_t>(v >> 24);
}

inline void quarter_round(uint32_t& a, uint32_t& b, uint32_t& c, uint32_t& d) {
  a += b; d ^= a; d = rotl(d, 16);
  c += d; b ^= c; b = rotl(b, 12);
  a += b; d ^= a; d = rotl(d, 8);
  c += d; b ^= c; b = rotl(b, 7);
}

}  // namespace

void block(const uint8_t key[32], uint32_t counter, const uint8_t nonce[12], uint8_t out[64]) {
  uint32_t st[16];
  st[0] = 0x61707865u;
  st[1] = 0x3320646eu;
  st[2] = 0x79622d32u;
  st[3] = 0x6b206574u;
  for (int i = 0; i < 8; ++i) st[4 + i] = load_le32(key + 4 * i);
  st[12] = counter;
  for (int i = 0; i < 3; ++i) st[13 + i] = load_le32(nonce + 4 * i);

  uint32_t w[16];
  std::memcpy(w, st, sizeof(w));
  for (int round = 0; round < 10; ++round) {
    quarter_round(w[0], w[4], w[8], w[12]);
    quarter_round(w[1], w[5], w[9], w[13]);
    quarter_round(w[2], w[6], w[10], w[14]);
    quarter_round(w[3], w[7], w[11], w[15]);
    quarter_round(w[0], w[5], w[10], w[15]);
    quarter_round(w[1], w[6], w[11], w[12]);
    quarter_round(w[2], w[7], w[8], w[13]);
    quarter_round(w[3], w[4], w[9], w[14]);
  }
  for (int i = 0; i < 16; ++i) store_le32(out + 4 * i, w[i] + st[i]);
}

Stream::Stream(const uint8_t key[32], const uint8_t nonce[12]) {
  std::memcpy(key_.data(), key, 32);
  std::memcpy(nonce_.data(), nonce, 12);
}

void Stream::refill() {
  uint64_t blk = pos_ / 64;
  if (blk != buf_block_) {
    if (blk > 0xffffffffull) fail(Errc::numeric, "keystream exhausted (counter overflow)");
    block(key_.data(), static_cast<uint32_t>(blk), nonce_.data(), buf_.data());
    buf_block_ = blk;
  }
}

void Stream::seek(uint64_t byte_pos) { pos_ = byte_pos; }

uint8_t Stream::next_byte() {
  refill();
  return buf_[pos_++ % 64];
}

uint32_t Stream::next_u32() {
  uint8_t b[4];
  fill(b, 4);
  return load_le32(b);
}

void Stream::fill(uint8_t* out, size_t n) {
  size_t done = 0;
  while (done < n) {
    refill();
    size_t off = pos_ % 64;
    size_t take = 64 - off;
    if (take > n - done) take = n - done;
    std::memcpy(out + done, buf_.data() + off, take);
    pos_ += take;
    done += take;
  }
}

uint32_t Stream::uniform_below(uint32_t n) {
  if (n == 0) fail(Errc::validation, "uniform_below(0)");
  if (n == 1) return 0;
  // Largest multiple of n that fits in 2^32; values at or above it are
  // rejected so the result is exactly uniform.
  uint64_t bound = ((uint64_t{1} << 32) / n) * n;
  uint32_t v;
  do {
    v = next_u32();
  } while (v >= bound);
  return v % n;
}

}  // namespace cryptovit::chacha
