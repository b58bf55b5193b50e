#pragma once

#include <array>
#include <cstdint>
#include <cstddef>

namespace cryptovit::chacha {

// ChaCha20 block function per RFC 7539: 256-bit key, 96-bit nonce,
// 32-bit block counter, 20 rounds. This is the only source of keyed
// pseudo-randomness in the artifact; docs/FORMATS.md specifies how keys,
// nonces and counters are formed so ciphertexts reproduce bit-for-bit
// across implementations.
void block(const uint8_t key[32], uint32_t counter, const uint8_t nonce[12], uint8_t out[64]);

// Seekable keystream over (key, nonce). Positions address the byte stream
// formed by concatenating blocks counter = 0, 1, 2, ...
class Stream {
 public:
  Stream(const uint8_t key[32], const uint8_t nonce[12]);

  void seek(uint64_t byte_pos);
  uint64_t position() const { return pos_; }

  uint8_t next_byte();
  uint32_t next_u32();  // little-endian from the next 4 stream bytes
  void fill(uint8_t* out, size_t n);

  // Unbiased sample from {0, ..., n-1} by rejection; n >= 1.
  uint32_t uniform_below(uint32_t n);

 private:
  void refill();

  std::array<uint8_t, 32> key_;
  std::array<uint8_t, 12> nonce_;
  std::array<uint8_t, 64> buf_;
  uint64_t pos_ = 0;       // next byte position in the stream
  uint64_t buf_block_ = ~0ull;  // counter of the block currently in buf_
};

}  // namespace cryptovit::chacha
