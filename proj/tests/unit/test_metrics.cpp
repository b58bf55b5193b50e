#include <doctest.h>

#include <cmath>

#include "cryptovit/cipher.hpp"
#include "cryptovit/common.hpp"
#include "cryptovit/metrics.hpp"
#include "cryptovit/rng.hpp"

using namespace cryptovit;
using imaging::ImageBuffer;

namespace {

ImageBuffer uniform_random(int h, int w, uint64_t seed) {
  rng::Rng rng(seed, "metrics-test");
  ImageBuffer img(h, w);
  for (auto& v : img.data) v = rng.next_byte();
  return img;
}

ImageBuffer constant(int h, int w, uint8_t v) {
  ImageBuffer img(h, w);
  std::fill(img.data.begin(), img.data.end(), v);
  return img;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("psnr: identical, +1 offset, independent uniform, symmetry") {
  auto a = uniform_random(32, 32, 1);
  CHECK(std::isinf(metrics::psnr(a, a)));

  ImageBuffer b = a;
  for (auto& v : b.data) v = static_cast<uint8_t>(std::min(254, static_cast<int>(v)) + 1);
  // rebuild so the diff is exactly +1 everywhere
  for (size_t i = 0; i < a.data.size(); ++i) {
    a.data[i] = static_cast<uint8_t>(a.data[i] % 200);
    b.data[i] = static_cast<uint8_t>(a.data[i] + 1);
  }
  CHECK(metrics::psnr(a, b) == doctest::Approx(10.0 * std::log10(255.0 * 255.0)).epsilon(1e-6));

  auto u1 = uniform_random(128, 128, 2);
  auto u2 = uniform_random(128, 128, 3);
  double p = metrics::psnr(u1, u2);
  CHECK(p == doctest::Approx(7.75).epsilon(0.04));  // 10 log10(255^2 / (2*(256^2-1)/12))
  CHECK(metrics::psnr(u1, u2) == metrics::psnr(u2, u1));

  CHECK_THROWS_AS(metrics::psnr(u1, constant(4, 4, 0)), Error);
}

TEST_CASE("npcr/uaci: identity, full swing, independent uniform expectations") {
  auto a = uniform_random(64, 64, 4);
  auto [npcr0, uaci0] = metrics::npcr_uaci(a, a);
  CHECK(npcr0 == 0.0);
  CHECK(uaci0 == 0.0);

  auto zeros = constant(16, 16, 0);
  auto full = constant(16, 16, 255);
  auto [npcr1, uaci1] = metrics::npcr_uaci(zeros, full);
  CHECK(npcr1 == 100.0);
  CHECK(uaci1 == 100.0);

  auto u1 = uniform_random(128, 128, 5);
  auto u2 = uniform_random(128, 128, 6);
  auto [npcr2, uaci2] = metrics::npcr_uaci(u1, u2);
  CHECK(npcr2 > 99.9);  // 100*(1-(1/256)^3)
  CHECK(uaci2 == doctest::Approx(33.46).epsilon(0.02));

  auto [npcr3, uaci3] = metrics::npcr_uaci(u2, u1);
  CHECK(npcr3 == npcr2);
  CHECK(uaci3 == uaci2);
}

TEST_CASE("entropy: constant, exact uniform histogram, ciphertext") {
  CHECK(metrics::entropy(constant(8, 8, 42)) == 0.0);

  // 16x16x3 = 768 samples; value v appears exactly 3 times
  ImageBuffer ramp(16, 16);
  for (size_t i = 0; i < ramp.data.size(); ++i) ramp.data[i] = static_cast<uint8_t>(i % 256);
  CHECK(metrics::entropy(ramp) == doctest::Approx(8.0).epsilon(1e-9));

  // encrypting does not collapse value diversity
  auto img = imaging::smooth_gradient_image(64, 3);
  keyspace::ClientKey key{};
  key.secret.fill(0x5a);
  key.client_id = "m";
  cipher::CipherConfig cfg;
  auto ct = cipher::encrypt(img, key, cfg);
  CHECK(metrics::entropy(ct.image) >= 0.95 * metrics::entropy(img));
}

TEST_CASE("adjacency correlation: gradient, checkerboard, ciphertext, degenerate") {
  ImageBuffer grad(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) grad.at(y, x, c) = static_cast<uint8_t>(4 * x + y / 8);
  auto r = metrics::adjacency_correlation(grad);
  REQUIRE(r.has_value());
  CHECK(*r > 0.95);

  ImageBuffer checker(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) checker.at(y, x, c) = ((x + y) % 2) ? 255 : 0;
  auto rc = metrics::adjacency_correlation(checker);
  REQUIRE(rc.has_value());
  CHECK(*rc < -0.95);

  keyspace::ClientKey key{};
  key.secret.fill(0x77);
  key.client_id = "m";
  cipher::CipherConfig cfg;
  auto ct = cipher::encrypt(imaging::smooth_gradient_image(64, 4), key, cfg);
  auto rct = metrics::adjacency_correlation(ct.image);
  REQUIRE(rct.has_value());
  CHECK(std::abs(*rct) < 0.1);

  CHECK(!metrics::adjacency_correlation(constant(8, 8, 9)).has_value());
}

TEST_CASE("pearson handles constant inputs with a sentinel") {
  auto a = uniform_random(16, 16, 7);
  CHECK(!metrics::pearson(a, constant(16, 16, 3)).has_value());
  auto self = metrics::pearson(a, a);
  REQUIRE(self.has_value());
  CHECK(*self == doctest::Approx(1.0));
}

}  // TEST_SUITE
