#pragma once

#include <string>

#include <json.hpp>

#include "cryptovit/imaging.hpp"
#include "cryptovit/keyspace.hpp"

namespace cryptovit::cipher {

enum class NegPosMode { per_pixel, per_channel };
enum class ChannelMode { per_pixel, per_block };

struct CipherConfig {
  int patch_size = 8;
  bool scramble = true;
  bool patch_shuffle = true;
  bool negpos = true;
  bool channel_shuffle = true;
  NegPosMode negpos_mode = NegPosMode::per_pixel;
  ChannelMode channel_mode = ChannelMode::per_pixel;

  bool operator==(const CipherConfig&) const = default;
};

struct Ciphertext {
  imaging::ImageBuffer image;
  CipherConfig config;
  std::string client_id;
};

// Stage primitives. patch_index selects the keystream domain; for the
// scramble stage it is the patch's pre-shuffle index, for negpos/channel
// stages its position in the shuffled grid (conventions in docs/FORMATS.md).

// Pixels (whole RGB triples) reordered within the patch: out[k] = in[perm[k]].
imaging::ImageBuffer scramble_patch(const imaging::ImageBuffer& patch,
                                    const keyspace::ClientKey& key, uint32_t patch_index);
imaging::ImageBuffer unscramble_patch(const imaging::ImageBuffer& patch,
                                      const keyspace::ClientKey& key, uint32_t patch_index);

// Grid reordered by sigma = derive_permutation(key, patch-shuffle tag, n):
// patch i moves to position sigma(i).
imaging::PatchGrid shuffle_patches(const imaging::PatchGrid& grid, const keyspace::ClientKey& key);
imaging::PatchGrid unshuffle_patches(const imaging::PatchGrid& grid,
                                     const keyspace::ClientKey& key);

// Conditional inversion x -> 255 - x; involution under the same key/tags.
imaging::ImageBuffer negpos_transform(const imaging::ImageBuffer& patch,
                                      const keyspace::ClientKey& key, uint32_t patch_index,
                                      NegPosMode mode = NegPosMode::per_pixel);

imaging::ImageBuffer shuffle_channels(const imaging::ImageBuffer& patch,
                                      const keyspace::ClientKey& key, uint32_t patch_index,
                                      ChannelMode mode = ChannelMode::per_pixel);
imaging::ImageBuffer unshuffle_channels(const imaging::ImageBuffer& patch,
                                        const keyspace::ClientKey& key, uint32_t patch_index,
                                        ChannelMode mode = ChannelMode::per_pixel);

Ciphertext encrypt(const imaging::ImageBuffer& img, const keyspace::ClientKey& key,
                   const CipherConfig& cfg);

// Exact inverse under the encrypting key. A wrong key is not detected (no
// MAC by design); the output is simply garbage.
imaging::ImageBuffer decrypt(const Ciphertext& ct, const keyspace::ClientKey& key);

// Sidecar JSON stored next to each ciphertext image (config + client_id,
// never the secret).
void save_sidecar(const Ciphertext& ct, const std::string& image_path);
CipherConfig load_sidecar(const std::string& image_path, std::string* client_id = nullptr);
std::string sidecar_path(const std::string& image_path);

nlohmann::json config_to_json(const CipherConfig& cfg);
CipherConfig config_from_json(const nlohmann::json& j);

}  // namespace cryptovit::cipher
