#include "cryptovit/keyspace.hpp"

#include <fstream>
#include <random>

#include <json.hpp>

#include "cryptovit/common.hpp"

namespace cryptovit::keyspace {

std::array<uint8_t, 12> DomainTag::encode() const {
  std::array<uint8_t, 12> nonce{};
  nonce[0] = static_cast<uint8_t>(stage);
  nonce[1] = static_cast<uint8_t>(patch_index >> 24);
  nonce[2] = static_cast<uint8_t>(patch_index >> 16);
  nonce[3] = static_cast<uint8_t>(patch_index >> 8);
  nonce[4] = static_cast<uint8_t>(patch_index);
  nonce[5] = static_cast<uint8_t>(pixel_index >> 24);
  nonce[6] = static_cast<uint8_t>(pixel_index >> 16);
  nonce[7] = static_cast<uint8_t>(pixel_index >> 8);
  nonce[8] = static_cast<uint8_t>(pixel_index);
  return nonce;
}

ClientKey make_key(const std::array<uint8_t, 32>& secret, std::string client_id) {
  ClientKey k;
  k.secret = secret;
  k.client_id = std::move(client_id);
  return k;
}

ClientKey generate_key(std::string client_id) {
  std::array<uint8_t, 32> secret{};
  std::random_device rd;
  for (size_t i = 0; i < secret.size(); i += 4) {
    uint32_t w = rd();
    secret[i] = static_cast<uint8_t>(w);
    secret[i + 1] = static_cast<uint8_t>(w >> 8);
    secret[i + 2] = static_cast<uint8_t>(w >> 16);
    secret[i + 3] = static_cast<uint8_t>(w >> 24);
  }
  return make_key(secret, std::move(client_id));
}

void save_key(const ClientKey& key, const std::string& path) {
  nlohmann::json j;
  j["client_id"] = key.client_id;
  j["secret"] = to_hex(key.secret.data(), key.secret.size());
  std::ofstream out(path);
  if (!out) fail(Errc::io_missing, "cannot write key file: " + path);
  out << j.dump(2) << "\n";
}

ClientKey load_key(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_missing, "key file not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io_corrupt, "malformed key file " + path + ": " + e.what());
  }
  if (!j.contains("client_id") || !j.contains("secret"))
    fail(Errc::validation, "key file missing client_id/secret: " + path);
  auto secret_bytes = from_hex(j["secret"].get<std::string>());
  if (secret_bytes.size() != 32)
    fail(Errc::validation, "key secret must be 64 hex chars: " + path);
  ClientKey k;
  std::copy(secret_bytes.begin(), secret_bytes.end(), k.secret.begin());
  k.client_id = j["client_id"].get<std::string>();
  return k;
}

chacha::Stream derive_stream(const ClientKey& key, const DomainTag& tag) {
  auto nonce = tag.encode();
  return chacha::Stream(key.secret.data(), nonce.data());
}

std::vector<uint32_t> derive_permutation(const ClientKey& key, const DomainTag& tag, uint32_t n) {
  if (n == 0) fail(Errc::validation, "derive_permutation: n must be >= 1");
  std::vector<uint32_t> perm(n);
  for (uint32_t i = 0; i < n; ++i) perm[i] = i;
  auto stream = derive_stream(key, tag);
  for (uint32_t i = n - 1; i > 0; --i) {
    uint32_t j = stream.uniform_below(i + 1);
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

int derive_bit(const ClientKey& key, const DomainTag& tag) {
  auto stream = derive_stream(key, tag);
  return stream.next_byte() & 1;
}

std::array<uint8_t, 3> derive_channel_perm(const ClientKey& key, const DomainTag& tag) {
  auto perm = derive_permutation(key, tag, 3);
  return {static_cast<uint8_t>(perm[0]), static_cast<uint8_t>(perm[1]),
          static_cast<uint8_t>(perm[2])};
}

std::vector<uint32_t> invert_permutation(const std::vector<uint32_t>& perm) {
  std::vector<uint32_t> inv(perm.size());
  for (uint32_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

}  // namespace cryptovit::keyspace
