#include "cryptovit/cipher.hpp"

#include <fstream>

#include <json.hpp>

#include "cryptovit/common.hpp"
#include "cryptovit/kernels.hpp"

namespace cryptovit::cipher {

using imaging::ImageBuffer;
using imaging::PatchGrid;
using keyspace::ClientKey;
using keyspace::DomainTag;
using keyspace::Stage;

namespace {

void check_patch(const ImageBuffer& patch) {
  if (patch.height != patch.width || patch.height < 1)
    fail(Errc::geometry, "stage expects a square patch");
}

ImageBuffer apply_pixel_permutation(const ImageBuffer& patch, const std::vector<uint32_t>& perm) {
  ImageBuffer out(patch.height, patch.width);
  const uint32_t n = static_cast<uint32_t>(patch.pixel_count());
  for (uint32_t k = 0; k < n; ++k) {
    const uint8_t* src = patch.data.data() + static_cast<size_t>(perm[k]) * 3;
    uint8_t* dst = out.data.data() + static_cast<size_t>(k) * 3;
    dst[0] = src[0];
    dst[1] = src[1];
    dst[2] = src[2];
  }
  return out;
}

}  // namespace

ImageBuffer scramble_patch(const ImageBuffer& patch, const ClientKey& key, uint32_t patch_index) {
  check_patch(patch);
  auto perm = keyspace::derive_permutation(key, {Stage::scramble, patch_index, 0},
                                           static_cast<uint32_t>(patch.pixel_count()));
  return apply_pixel_permutation(patch, perm);
}

ImageBuffer unscramble_patch(const ImageBuffer& patch, const ClientKey& key,
                             uint32_t patch_index) {
  check_patch(patch);
  auto perm = keyspace::derive_permutation(key, {Stage::scramble, patch_index, 0},
                                           static_cast<uint32_t>(patch.pixel_count()));
  return apply_pixel_permutation(patch, keyspace::invert_permutation(perm));
}

PatchGrid shuffle_patches(const PatchGrid& grid, const ClientKey& key) {
  auto sigma = keyspace::derive_permutation(key, {Stage::patch_shuffle, 0, 0},
                                            static_cast<uint32_t>(grid.patches.size()));
  PatchGrid out = grid;
  for (uint32_t i = 0; i < sigma.size(); ++i) out.patches[sigma[i]] = grid.patches[i];
  return out;
}

PatchGrid unshuffle_patches(const PatchGrid& grid, const ClientKey& key) {
  auto sigma = keyspace::derive_permutation(key, {Stage::patch_shuffle, 0, 0},
                                            static_cast<uint32_t>(grid.patches.size()));
  PatchGrid out = grid;
  for (uint32_t i = 0; i < sigma.size(); ++i) out.patches[i] = grid.patches[sigma[i]];
  return out;
}

ImageBuffer negpos_transform(const ImageBuffer& patch, const ClientKey& key, uint32_t patch_index,
                             NegPosMode mode) {
  check_patch(patch);
  const uint32_t n = static_cast<uint32_t>(patch.pixel_count());
  // x -> 255 - x is x ^ 0xff on bytes, so the stage reduces to one XOR pass
  std::vector<uint8_t> mask(patch.data.size(), 0);
  if (mode == NegPosMode::per_pixel) {
    for (uint32_t p = 0; p < n; ++p) {
      if (keyspace::derive_bit(key, {Stage::negpos, patch_index, p})) {
        mask[3 * p] = mask[3 * p + 1] = mask[3 * p + 2] = 0xff;
      }
    }
  } else {
    for (uint32_t p = 0; p < n; ++p) {
      for (uint32_t c = 0; c < 3; ++c) {
        if (keyspace::derive_bit(key, {Stage::negpos, patch_index, 3 * p + c}))
          mask[3 * p + c] = 0xff;
      }
    }
  }
  ImageBuffer out(patch.height, patch.width);
  kernels::xor_bytes(patch.data.data(), mask.data(), out.data.data(), mask.size());
  return out;
}

ImageBuffer shuffle_channels(const ImageBuffer& patch, const ClientKey& key, uint32_t patch_index,
                             ChannelMode mode) {
  check_patch(patch);
  ImageBuffer out(patch.height, patch.width);
  const uint32_t n = static_cast<uint32_t>(patch.pixel_count());
  if (mode == ChannelMode::per_pixel) {
    for (uint32_t p = 0; p < n; ++p) {
      auto perm = keyspace::derive_channel_perm(key, {Stage::channel_shuffle, patch_index, p});
      const uint8_t* src = patch.data.data() + static_cast<size_t>(p) * 3;
      uint8_t* dst = out.data.data() + static_cast<size_t>(p) * 3;
      for (int c = 0; c < 3; ++c) dst[c] = src[perm[c]];
    }
  } else {
    auto perm = keyspace::derive_channel_perm(key, {Stage::channel_shuffle, patch_index, 0});
    for (uint32_t p = 0; p < n; ++p) {
      const uint8_t* src = patch.data.data() + static_cast<size_t>(p) * 3;
      uint8_t* dst = out.data.data() + static_cast<size_t>(p) * 3;
      for (int c = 0; c < 3; ++c) dst[c] = src[perm[c]];
    }
  }
  return out;
}

ImageBuffer unshuffle_channels(const ImageBuffer& patch, const ClientKey& key,
                               uint32_t patch_index, ChannelMode mode) {
  check_patch(patch);
  ImageBuffer out(patch.height, patch.width);
  const uint32_t n = static_cast<uint32_t>(patch.pixel_count());
  auto apply_inverse = [&](uint32_t p, const std::array<uint8_t, 3>& perm) {
    const uint8_t* src = patch.data.data() + static_cast<size_t>(p) * 3;
    uint8_t* dst = out.data.data() + static_cast<size_t>(p) * 3;
    for (int c = 0; c < 3; ++c) dst[perm[c]] = src[c];
  };
  if (mode == ChannelMode::per_pixel) {
    for (uint32_t p = 0; p < n; ++p)
      apply_inverse(p, keyspace::derive_channel_perm(key, {Stage::channel_shuffle, patch_index, p}));
  } else {
    auto perm = keyspace::derive_channel_perm(key, {Stage::channel_shuffle, patch_index, 0});
    for (uint32_t p = 0; p < n; ++p) apply_inverse(p, perm);
  }
  return out;
}

Ciphertext encrypt(const ImageBuffer& img, const ClientKey& key, const CipherConfig& cfg) {
  PatchGrid grid = imaging::partition(img, cfg.patch_size);
  const uint32_t n = static_cast<uint32_t>(grid.patches.size());

  if (cfg.scramble) {
    for (uint32_t i = 0; i < n; ++i) grid.patches[i] = scramble_patch(grid.patches[i], key, i);
  }
  if (cfg.patch_shuffle) grid = shuffle_patches(grid, key);
  if (cfg.negpos) {
    for (uint32_t j = 0; j < n; ++j)
      grid.patches[j] = negpos_transform(grid.patches[j], key, j, cfg.negpos_mode);
  }
  if (cfg.channel_shuffle) {
    for (uint32_t j = 0; j < n; ++j)
      grid.patches[j] = shuffle_channels(grid.patches[j], key, j, cfg.channel_mode);
  }

  Ciphertext ct;
  ct.image = imaging::reassemble(grid);
  ct.config = cfg;
  ct.client_id = key.client_id;
  return ct;
}

ImageBuffer decrypt(const Ciphertext& ct, const ClientKey& key) {
  const CipherConfig& cfg = ct.config;
  PatchGrid grid = imaging::partition(ct.image, cfg.patch_size);
  const uint32_t n = static_cast<uint32_t>(grid.patches.size());

  if (cfg.channel_shuffle) {
    for (uint32_t j = 0; j < n; ++j)
      grid.patches[j] = unshuffle_channels(grid.patches[j], key, j, cfg.channel_mode);
  }
  if (cfg.negpos) {
    for (uint32_t j = 0; j < n; ++j)
      grid.patches[j] = negpos_transform(grid.patches[j], key, j, cfg.negpos_mode);
  }
  if (cfg.patch_shuffle) grid = unshuffle_patches(grid, key);
  if (cfg.scramble) {
    for (uint32_t i = 0; i < n; ++i) grid.patches[i] = unscramble_patch(grid.patches[i], key, i);
  }
  return imaging::reassemble(grid);
}

// --- sidecar -------------------------------------------------------------

static const char* negpos_mode_name(NegPosMode m) {
  return m == NegPosMode::per_pixel ? "per_pixel" : "per_channel";
}
static const char* channel_mode_name(ChannelMode m) {
  return m == ChannelMode::per_pixel ? "per_pixel" : "per_block";
}

nlohmann::json config_to_json(const CipherConfig& cfg) {
  return nlohmann::json{{"patch_size", cfg.patch_size},
                        {"stages",
                         {{"scramble", cfg.scramble},
                          {"patch_shuffle", cfg.patch_shuffle},
                          {"negpos", cfg.negpos},
                          {"channel_shuffle", cfg.channel_shuffle}}},
                        {"negpos_mode", negpos_mode_name(cfg.negpos_mode)},
                        {"channel_mode", channel_mode_name(cfg.channel_mode)}};
}

CipherConfig config_from_json(const nlohmann::json& j) {
  CipherConfig cfg;
  cfg.patch_size = j.at("patch_size").get<int>();
  const auto& st = j.at("stages");
  cfg.scramble = st.at("scramble").get<bool>();
  cfg.patch_shuffle = st.at("patch_shuffle").get<bool>();
  cfg.negpos = st.at("negpos").get<bool>();
  cfg.channel_shuffle = st.at("channel_shuffle").get<bool>();
  std::string nm = j.value("negpos_mode", "per_pixel");
  cfg.negpos_mode = nm == "per_channel" ? NegPosMode::per_channel : NegPosMode::per_pixel;
  std::string cm = j.value("channel_mode", "per_pixel");
  cfg.channel_mode = cm == "per_block" ? ChannelMode::per_block : ChannelMode::per_pixel;
  if (cfg.patch_size < 1) fail(Errc::config, "patch_size must be >= 1");
  return cfg;
}

std::string sidecar_path(const std::string& image_path) { return image_path + ".meta.json"; }

void save_sidecar(const Ciphertext& ct, const std::string& image_path) {
  nlohmann::json j;
  j["cipher"] = config_to_json(ct.config);
  j["client_id"] = ct.client_id;
  std::ofstream out(sidecar_path(image_path));
  if (!out) fail(Errc::io_missing, "cannot write sidecar for: " + image_path);
  out << j.dump(2) << "\n";
}

CipherConfig load_sidecar(const std::string& image_path, std::string* client_id) {
  std::ifstream in(sidecar_path(image_path));
  if (!in) fail(Errc::io_missing, "sidecar not found for: " + image_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io_corrupt, "malformed sidecar for " + image_path + ": " + e.what());
  }
  if (client_id) *client_id = j.value("client_id", std::string());
  return config_from_json(j.at("cipher"));
}

}  // namespace cryptovit::cipher
