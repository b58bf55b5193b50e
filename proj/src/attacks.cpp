#include "cryptovit/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "cryptovit/common.hpp"
#include "cryptovit/kernels.hpp"
#include "cryptovit/metrics.hpp"
#include "cryptovit/rng.hpp"

namespace fs = std::filesystem;

namespace cryptovit::attacks {

using imaging::DatasetManifest;
using imaging::ImageBuffer;

void PoisonPlan::validate() const {
  if (fraction < 0.0 || fraction > 1.0) fail(Errc::validation, "poison fraction must be in [0,1]");
  if (sigma < 0.0) fail(Errc::validation, "sigma must be >= 0");
  if (bit_position != kRandomBit && (bit_position < 0 || bit_position > 7))
    fail(Errc::validation, "bit position must be 0..7 or random");
}

ImageBuffer bit_flip_attack(const ImageBuffer& img, const PoisonPlan& plan) {
  plan.validate();
  std::vector<uint8_t> mask(img.data.size());
  if (plan.bit_position == kRandomBit) {
    rng::Rng rng(plan.seed, "bitflip");
    for (size_t p = 0; p < img.pixel_count(); ++p) {
      uint8_t m = static_cast<uint8_t>(1u << rng.uniform_below(8));
      mask[3 * p] = mask[3 * p + 1] = mask[3 * p + 2] = m;
    }
  } else {
    std::fill(mask.begin(), mask.end(), static_cast<uint8_t>(1u << plan.bit_position));
  }
  ImageBuffer out = img;
  kernels::xor_bytes(img.data.data(), mask.data(), out.data.data(), mask.size());
  return out;
}

ImageBuffer gaussian_noise_attack(const ImageBuffer& img, const PoisonPlan& plan) {
  plan.validate();
  rng::Rng rng(plan.seed, "gaussian-noise");
  ImageBuffer out = img;
  for (size_t i = 0; i < img.data.size(); ++i) {
    double v = static_cast<double>(img.data[i]) + rng.gaussian(plan.mu, plan.sigma);
    out.data[i] = static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
  }
  return out;
}

DatasetManifest poison_dataset(const DatasetManifest& manifest, const std::string& out_dir,
                               const PoisonPlan& plan) {
  plan.validate();
  manifest.validate();

  auto train_idx = manifest.indices(imaging::Split::train);
  size_t n_poison = static_cast<size_t>(std::floor(plan.fraction * train_idx.size()));

  std::error_code ec;
  fs::create_directories(out_dir, ec);

  DatasetManifest out = manifest;
  if (n_poison == 0) return out;

  // the selection is the prefix of one seeded permutation, so a 10% and a
  // 20% plan with the same seed poison nested sets
  rng::Rng rng(plan.seed, "poison-select");
  auto order = rng.permutation(static_cast<uint32_t>(train_idx.size()));

  for (size_t k = 0; k < n_poison; ++k) {
    size_t idx = train_idx[order[k]];
    const auto& item = manifest.items[idx];
    if (!fs::exists(item.path)) fail(Errc::io_missing, "ciphertext missing: " + item.path);
    ImageBuffer img = imaging::load_image(item.path);

    PoisonPlan per_image = plan;
    // one reproducible noise stream per image, derived from the plan seed
    // and the image's index in the manifest
    per_image.seed = sub_seed(plan.seed, "poison-image-" + std::to_string(idx));
    ImageBuffer attacked = plan.attack == PoisonAttack::bit_flip
                               ? bit_flip_attack(img, per_image)
                               : gaussian_noise_attack(img, per_image);

    std::string name = fs::path(item.path).filename().string();
    std::string out_path = (fs::path(out_dir) / name).string();
    imaging::save_image(attacked, out_path);
    // carry the sidecar along so decrypt/eval tooling still works
    if (fs::exists(cipher::sidecar_path(item.path)))
      fs::copy_file(cipher::sidecar_path(item.path), cipher::sidecar_path(out_path),
                    fs::copy_options::overwrite_existing);
    out.items[idx].path = out_path;
    out.items[idx].poisoned = true;
  }
  return out;
}

// --- reconstruction attacks ----------------------------------------------

namespace {

ReconstructionResult score(ImageBuffer reconstructed, ReconstructionAttack kind,
                           const ImageBuffer* plaintext) {
  ReconstructionResult res;
  res.reconstructed = std::move(reconstructed);
  res.attack = kind;
  if (plaintext) {
    res.psnr_vs_plain = metrics::psnr(res.reconstructed, *plaintext);
    res.correlation_vs_plain = metrics::pearson(res.reconstructed, *plaintext);
  }
  return res;
}

}  // namespace

ReconstructionResult leading_bit_attack(const cipher::Ciphertext& ct,
                                        const ImageBuffer* plaintext) {
  const ImageBuffer& src = ct.image;
  ImageBuffer out(src.height, src.width);
  for (size_t p = 0; p < src.pixel_count(); ++p) {
    int sum = 0;
    for (int c = 0; c < 3; ++c) {
      int x = src.data[3 * p + c];
      sum += std::min(x, 255 - x);
    }
    uint8_t g = static_cast<uint8_t>((sum + 1) / 3);  // nearest-int mean of 3
    out.data[3 * p] = out.data[3 * p + 1] = out.data[3 * p + 2] = g;
  }
  return score(std::move(out), ReconstructionAttack::leading_bit, plaintext);
}

namespace {

// all 6 channel permutations, fixed enumeration order
constexpr uint8_t kPerm3[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                  {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};

struct Candidate {
  uint8_t v[3];
};

// 12 candidates: non-inverted first, then inverted, each in kPerm3 order;
// ties resolve to the earliest, which keeps the attack deterministic
void build_candidates(const uint8_t* px, Candidate out[12]) {
  for (int inv = 0; inv < 2; ++inv) {
    for (int k = 0; k < 6; ++k) {
      Candidate& c = out[inv * 6 + k];
      for (int ch = 0; ch < 3; ++ch) {
        uint8_t v = px[kPerm3[k][ch]];
        c.v[ch] = inv ? static_cast<uint8_t>(255 - v) : v;
      }
    }
  }
}

int l1(const uint8_t* a, const uint8_t* b) {
  int s = 0;
  for (int c = 0; c < 3; ++c) s += std::abs(static_cast<int>(a[c]) - static_cast<int>(b[c]));
  return s;
}

}  // namespace

ReconstructionResult minimum_difference_attack(const cipher::Ciphertext& ct,
                                               const ImageBuffer* plaintext) {
  const ImageBuffer& src = ct.image;
  ImageBuffer out(src.height, src.width);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const uint8_t* px = src.pixel(y, x);
      uint8_t* dst = out.pixel(y, x);
      if (x == 0 && y == 0) {
        dst[0] = px[0];
        dst[1] = px[1];
        dst[2] = px[2];
        continue;
      }
      const uint8_t* ref = (x > 0) ? out.pixel(y, x - 1) : out.pixel(y - 1, x);
      Candidate cands[12];
      build_candidates(px, cands);
      int best = 0;
      int best_cost = l1(ref, cands[0].v);
      for (int k = 1; k < 12; ++k) {
        int cost = l1(ref, cands[k].v);
        if (cost < best_cost) {
          best_cost = cost;
          best = k;
        }
      }
      dst[0] = cands[best].v[0];
      dst[1] = cands[best].v[1];
      dst[2] = cands[best].v[2];
    }
  }
  return score(std::move(out), ReconstructionAttack::minimum_difference, plaintext);
}

}  // namespace cryptovit::attacks
