#include "cryptovit/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "cryptovit/common.hpp"
#include "cryptovit/kernels.hpp"

namespace cryptovit::metrics {

using imaging::ImageBuffer;

namespace {

void check_shapes(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.height != b.height || a.width != b.width)
    fail(Errc::geometry, "metric requires equal image shapes");
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  check_shapes(a, b);
  uint64_t ssd = kernels::sum_sq_diff(a.data.data(), b.data.data(), a.data.size());
  if (ssd == 0) return std::numeric_limits<double>::infinity();
  double mse = static_cast<double>(ssd) / static_cast<double>(a.data.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

std::pair<double, double> npcr_uaci(const ImageBuffer& a, const ImageBuffer& b) {
  check_shapes(a, b);
  size_t n_px = a.pixel_count();
  size_t changed = 0;
  for (size_t p = 0; p < n_px; ++p) {
    const uint8_t* pa = a.data.data() + 3 * p;
    const uint8_t* pb = b.data.data() + 3 * p;
    if (pa[0] != pb[0] || pa[1] != pb[1] || pa[2] != pb[2]) ++changed;
  }
  uint64_t sad = kernels::sum_abs_diff(a.data.data(), b.data.data(), a.data.size());
  double npcr = 100.0 * static_cast<double>(changed) / static_cast<double>(n_px);
  double uaci = 100.0 * static_cast<double>(sad) / (255.0 * static_cast<double>(a.data.size()));
  return {npcr, uaci};
}

double entropy(const ImageBuffer& img) {
  std::array<uint64_t, 256> hist{};
  for (uint8_t v : img.data) ++hist[v];
  double total = static_cast<double>(img.data.size());
  double h = 0.0;
  for (uint64_t count : hist) {
    if (count == 0) continue;
    double p = static_cast<double>(count) / total;
    h -= p * std::log2(p);
  }
  return h;
}

namespace {

std::optional<double> pearson_of_pairs(const std::vector<double>& xs, const std::vector<double>& ys) {
  size_t n = xs.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    double dx = xs[i] - mx;
    double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

std::optional<double> adjacency_correlation(const ImageBuffer& img) {
  if (img.width < 2) fail(Errc::geometry, "adjacency correlation needs width >= 2");
  std::vector<double> xs, ys;
  xs.reserve(img.pixel_count() * 3);
  ys.reserve(img.pixel_count() * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x + 1 < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        xs.push_back(img.at(y, x, c));
        ys.push_back(img.at(y, x + 1, c));
      }
    }
  }
  return pearson_of_pairs(xs, ys);
}

std::optional<double> pearson(const ImageBuffer& a, const ImageBuffer& b) {
  check_shapes(a, b);
  std::vector<double> xs(a.data.begin(), a.data.end());
  std::vector<double> ys(b.data.begin(), b.data.end());
  return pearson_of_pairs(xs, ys);
}

}  // namespace cryptovit::metrics
