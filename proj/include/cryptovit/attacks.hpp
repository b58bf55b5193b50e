#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cryptovit/cipher.hpp"
#include "cryptovit/imaging.hpp"

namespace cryptovit::attacks {

enum class PoisonAttack { bit_flip, gaussian_noise };

inline constexpr int kRandomBit = -1;

struct PoisonPlan {
  double fraction = 0.1;  // proportion of training images attacked
  PoisonAttack attack = PoisonAttack::bit_flip;
  int bit_position = kRandomBit;  // 0..7, or kRandomBit for one draw per pixel
  double mu = 0.0;
  double sigma = 25.0;
  uint64_t seed = 0;

  void validate() const;
};

// XOR every channel value with 2^n. With bit_position = kRandomBit one n is
// drawn per pixel (the same bit for the pixel's three channels).
imaging::ImageBuffer bit_flip_attack(const imaging::ImageBuffer& img, const PoisonPlan& plan);

// Per-channel additive draw from N(mu, sigma^2), rounded and clamped.
imaging::ImageBuffer gaussian_noise_attack(const imaging::ImageBuffer& img,
                                           const PoisonPlan& plan);

// Applies the plan's attack to floor(fraction * n_train) training
// ciphertexts selected uniformly without replacement. Attacked copies are
// written under out_dir; the returned manifest points poisoned items there
// and leaves validation items untouched. Selections nest across fractions
// for a fixed seed.
imaging::DatasetManifest poison_dataset(const imaging::DatasetManifest& manifest,
                                        const std::string& out_dir, const PoisonPlan& plan);

enum class ReconstructionAttack { leading_bit, minimum_difference };

struct ReconstructionResult {
  imaging::ImageBuffer reconstructed;
  ReconstructionAttack attack;
  std::optional<double> psnr_vs_plain;
  std::optional<double> correlation_vs_plain;
};

// Ciphertext-only attacks; the attacker knows the scheme but not the key.
// The optional plaintext is used for scoring only.

// Collapses the negpos ambiguity per channel value (x -> min(x, 255-x)),
// then averages channels into a grayscale estimate.
ReconstructionResult leading_bit_attack(const cipher::Ciphertext& ct,
                                        const imaging::ImageBuffer* plaintext = nullptr);

// Greedy raster scan; per pixel picks, among the 12 candidates
// {pi(p), pi(255-p) : pi in S3}, the one closest (L1 over channels) to the
// already-reconstructed left neighbor (top neighbor in column 0; the origin
// is kept as-is).
ReconstructionResult minimum_difference_attack(const cipher::Ciphertext& ct,
                                               const imaging::ImageBuffer* plaintext = nullptr);

}  // namespace cryptovit::attacks
