#pragma once

#include <optional>

#include "cryptovit/imaging.hpp"

namespace cryptovit::metrics {

struct SecurityReport {
  double npcr = 0;                              // percent of positions with any channel differing
  double uaci = 0;                              // percent, mean |a-b| / 255
  double entropy = 0;                           // bits, pooled channel histogram
  std::optional<double> adjacency_correlation;  // nullopt when variance degenerates
  double psnr = 0;                              // dB; +inf for identical images
  double pearson = 0;                           // vs reference
};

// 10*log10(255^2 / MSE); +infinity for identical images.
double psnr(const imaging::ImageBuffer& a, const imaging::ImageBuffer& b);

// NPCR counts a position as changed if ANY channel differs (strictest
// variant); UACI averages |a-b|/255 over all channel samples. Both in percent.
std::pair<double, double> npcr_uaci(const imaging::ImageBuffer& a, const imaging::ImageBuffer& b);

// Shannon entropy of the pooled 256-bin channel-value histogram.
double entropy(const imaging::ImageBuffer& img);

// Pearson correlation between horizontally adjacent samples, channels pooled.
// nullopt if either side has zero variance.
std::optional<double> adjacency_correlation(const imaging::ImageBuffer& img);

// Pearson correlation between the two images' channel samples.
// nullopt if either image is constant.
std::optional<double> pearson(const imaging::ImageBuffer& a, const imaging::ImageBuffer& b);

}  // namespace cryptovit::metrics
