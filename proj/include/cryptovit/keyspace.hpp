#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cryptovit/chacha20.hpp"

namespace cryptovit::keyspace {

// Every keyed randomization in the cipher (scramble permutations, patch
// shuffle, inversion bits, channel permutations) is drawn from a ChaCha20
// keystream keyed by the client secret, with the domain tag encoded into
// the nonce. See docs/FORMATS.md for the bit-level layout.

enum class Stage : uint8_t {
  scramble = 0,
  patch_shuffle = 1,
  negpos = 2,
  channel_shuffle = 3,
};

struct DomainTag {
  Stage stage;
  uint32_t patch_index = 0;
  uint32_t pixel_index = 0;

  // 12-byte nonce: stage | patch_index (BE) | pixel_index (BE) | 3 zero bytes
  std::array<uint8_t, 12> encode() const;

  bool operator==(const DomainTag&) const = default;
};

struct ClientKey {
  std::array<uint8_t, 32> secret{};
  std::string client_id;
};

ClientKey make_key(const std::array<uint8_t, 32>& secret, std::string client_id);

// Fresh key from OS entropy (keygen CLI).
ClientKey generate_key(std::string client_id);

// Key file: small JSON text {"client_id": ..., "secret": 64 hex chars}.
void save_key(const ClientKey& key, const std::string& path);
ClientKey load_key(const std::string& path);

chacha::Stream derive_stream(const ClientKey& key, const DomainTag& tag);

// Uniform permutation of {0..n-1} via Fisher-Yates with rejection-sampled
// bounded draws from the tag's stream.
std::vector<uint32_t> derive_permutation(const ClientKey& key, const DomainTag& tag, uint32_t n);

int derive_bit(const ClientKey& key, const DomainTag& tag);

std::array<uint8_t, 3> derive_channel_perm(const ClientKey& key, const DomainTag& tag);

std::vector<uint32_t> invert_permutation(const std::vector<uint32_t>& perm);

}  // namespace cryptovit::keyspace
