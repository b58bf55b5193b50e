#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cryptovit/common.hpp"
#include "cryptovit/imaging.hpp"
#include "cryptovit/kernels.hpp"
#include "cryptovit/rng.hpp"

using namespace cryptovit;
using imaging::ImageBuffer;

namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  auto dir = fs::temp_directory_path() / "cryptovit_imaging_test";
  fs::create_directories(dir);
  return dir;
}

ImageBuffer random_image(int h, int w, uint64_t seed) {
  rng::Rng rng(seed, "test-image");
  ImageBuffer img(h, w);
  for (auto& v : img.data) v = rng.next_byte();
  return img;
}

}  // namespace

TEST_SUITE("imaging") {

TEST_CASE("ppm round trip is bit exact; pgm replicates gray") {
  auto dir = test_dir();
  ImageBuffer img = random_image(13, 9, 1);
  auto path = (dir / "rt.ppm").string();
  imaging::save_ppm(img, path);
  CHECK(imaging::load_image(path) == img);

  // hand-written 2x2 PGM
  auto pgm = (dir / "gray.pgm").string();
  {
    std::ofstream out(pgm, std::ios::binary);
    out << "P5\n2 2\n255\n";
    uint8_t px[4] = {0, 7, 128, 255};
    out.write(reinterpret_cast<char*>(px), 4);
  }
  auto g = imaging::load_image(pgm);
  CHECK(g.height == 2);
  CHECK(g.width == 2);
  CHECK(g.at(0, 1, 0) == 7);
  CHECK(g.at(0, 1, 1) == 7);
  CHECK(g.at(0, 1, 2) == 7);
  CHECK(g.at(1, 1, 0) == 255);
}

TEST_CASE("png round trip is lossless, including a 1x1 black pixel") {
  auto dir = test_dir();
  ImageBuffer img = random_image(20, 31, 2);
  auto path = (dir / "rt.png").string();
  imaging::save_image(img, path);
  CHECK(imaging::load_image(path) == img);

  ImageBuffer black(1, 1);
  auto bp = (dir / "black.png").string();
  imaging::save_image(black, bp);
  auto loaded = imaging::load_image(bp);
  CHECK(loaded.data == std::vector<uint8_t>{0, 0, 0});
}

TEST_CASE("load_image error cases are distinct") {
  auto dir = test_dir();
  CHECK_THROWS_WITH_AS(imaging::load_image((dir / "nope.png").string()),
                       doctest::Contains("not found"), Error);

  auto txt = (dir / "notimage.txt").string();
  {
    std::ofstream out(txt);
    out << "hello";
  }
  try {
    imaging::load_image(txt);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::io_unsupported);
  }

  // corrupt PNG: valid signature then garbage
  auto bad = (dir / "bad.png").string();
  {
    std::ofstream out(bad, std::ios::binary);
    const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    out.write(reinterpret_cast<const char*>(sig), 8);
    out << "garbage";
  }
  try {
    imaging::load_image(bad);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::io_corrupt);
  }

  // truncated PPM
  auto trunc = (dir / "trunc.ppm").string();
  {
    std::ofstream out(trunc, std::ios::binary);
    out << "P6\n4 4\n255\n";
    out << "xx";
  }
  try {
    imaging::load_image(trunc);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::io_corrupt);
  }
}

TEST_CASE("normalize_geometry: identity, nearest-neighbor halving, crop oracle") {
  ImageBuffer same = random_image(200, 200, 3);
  CHECK(imaging::normalize_geometry(same, 200, 25) == same);

  // 400 -> 200: every output pixel equals the source at doubled coordinates
  ImageBuffer big = random_image(400, 400, 4);
  auto half = imaging::normalize_geometry(big, 200, 25);
  bool ok = true;
  for (int y = 0; y < 200 && ok; ++y)
    for (int x = 0; x < 200 && ok; ++x)
      for (int c = 0; c < 3; ++c)
        if (half.at(y, x, c) != big.at(2 * y, 2 * x, c)) ok = false;
  CHECK(ok);

  // 300x200 -> crop the central 200x200 then identity
  ImageBuffer wide = random_image(200, 300, 5);
  auto cropped = imaging::normalize_geometry(wide, 200, 25);
  ImageBuffer expect(200, 200);
  for (int y = 0; y < 200; ++y)
    for (int x = 0; x < 200; ++x)
      for (int c = 0; c < 3; ++c) expect.at(y, x, c) = wide.at(y, x + 50, c);
  CHECK(cropped == expect);

  // idempotence
  ImageBuffer odd = random_image(123, 77, 6);
  auto once = imaging::normalize_geometry(odd, 64, 8);
  CHECK(imaging::normalize_geometry(once, 64, 8) == once);

  CHECK_THROWS_AS(imaging::normalize_geometry(same, 200, 7), Error);
}

TEST_CASE("partition: paper geometry, single patch, hand-indexed oracle") {
  ImageBuffer paper = random_image(200, 200, 7);
  auto grid = imaging::partition(paper, 25);
  CHECK(grid.patches.size() == 64);
  CHECK(grid.rows == 8);
  CHECK(grid.cols == 8);
  for (const auto& p : grid.patches) {
    CHECK(p.height == 25);
    CHECK(p.width == 25);
  }

  ImageBuffer one = random_image(25, 25, 8);
  auto single = imaging::partition(one, 25);
  CHECK(single.patches.size() == 1);
  CHECK(single.patches[0] == one);

  // 8x8 with distinct values, ps=4: check indices by brute-force arithmetic
  ImageBuffer small(8, 8);
  for (size_t i = 0; i < small.data.size(); ++i) small.data[i] = static_cast<uint8_t>(i);
  auto quads = imaging::partition(small, 4);
  CHECK(quads.patches.size() == 4);
  for (int pr = 0; pr < 2; ++pr)
    for (int pc = 0; pc < 2; ++pc)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
          for (int c = 0; c < 3; ++c)
            CHECK(quads.patches[pr * 2 + pc].at(y, x, c) ==
                  small.at(pr * 4 + y, pc * 4 + x, c));

  CHECK_THROWS_AS(imaging::partition(small, 3), Error);
}

TEST_CASE("reassemble inverts partition over random geometries") {
  rng::Rng rng(9, "geom");
  for (int t = 0; t < 30; ++t) {
    int ps = 1 + static_cast<int>(rng.uniform_below(12));
    int rows = 1 + static_cast<int>(rng.uniform_below(6));
    int cols = 1 + static_cast<int>(rng.uniform_below(6));
    ImageBuffer img = random_image(rows * ps, cols * ps, 100 + t);
    CHECK(imaging::reassemble(imaging::partition(img, ps)) == img);
  }
}

TEST_CASE("reassemble with swapped patches matches a manual pixel oracle") {
  ImageBuffer img = random_image(8, 8, 10);
  auto grid = imaging::partition(img, 4);
  std::swap(grid.patches[0], grid.patches[3]);
  auto swapped = imaging::reassemble(grid);

  ImageBuffer expect = img;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) {
        expect.at(y, x, c) = img.at(y + 4, x + 4, c);
        expect.at(y + 4, x + 4, c) = img.at(y, x, c);
      }
  CHECK(swapped == expect);

  grid.patches[0] = ImageBuffer(3, 3);  // inconsistent patch size
  CHECK_THROWS_AS(imaging::reassemble(grid), Error);
}

TEST_CASE("synthetic dataset: counts, determinism, manifest round trip") {
  auto dir = test_dir() / "synth_a";
  fs::remove_all(dir);
  imaging::SynthConfig cfg;
  cfg.n_classes = 2;
  cfg.per_class = 20;
  cfg.size = 32;
  cfg.seed = 11;
  cfg.out_dir = dir.string();
  auto manifest = imaging::generate_synthetic_dataset(cfg);
  CHECK(manifest.items.size() == 40);
  CHECK(manifest.classes.size() == 2);

  size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".png") ++files;
  CHECK(files == 40);

  // split: 16 train / 4 val per class
  int train = 0;
  for (const auto& item : manifest.items)
    if (item.split == imaging::Split::train) ++train;
  CHECK(train == 32);

  // deterministic re-run produces byte-identical images
  auto dir_b = test_dir() / "synth_b";
  fs::remove_all(dir_b);
  auto cfg_b = cfg;
  cfg_b.out_dir = dir_b.string();
  auto manifest_b = imaging::generate_synthetic_dataset(cfg_b);
  for (size_t i = 0; i < manifest.items.size(); ++i) {
    std::ifstream fa(manifest.items[i].path, std::ios::binary);
    std::ifstream fb(manifest_b.items[i].path, std::ios::binary);
    std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ba == bb);
  }

  auto loaded = imaging::load_manifest((dir / "manifest.json").string());
  CHECK(loaded.items.size() == manifest.items.size());
  CHECK(loaded.classes == manifest.classes);
  for (size_t i = 0; i < loaded.items.size(); ++i) {
    CHECK(loaded.items[i].path == manifest.items[i].path);
    CHECK(loaded.items[i].label == manifest.items[i].label);
    CHECK(loaded.items[i].split == manifest.items[i].split);
  }

  imaging::SynthConfig bad = cfg;
  bad.n_classes = 1;
  CHECK_THROWS_AS(imaging::generate_synthetic_dataset(bad), Error);
  bad = cfg;
  bad.per_class = 5;
  CHECK_THROWS_AS(imaging::generate_synthetic_dataset(bad), Error);
}

// A multinomial logistic baseline must separate the classes on plaintext;
// this is the independent separability oracle for the generator.
TEST_CASE("synthetic classes are separable by a logistic baseline") {
  auto dir = test_dir() / "synth_sep";
  fs::remove_all(dir);
  imaging::SynthConfig cfg;
  cfg.n_classes = 3;
  cfg.per_class = 30;
  cfg.size = 32;
  cfg.seed = 12;
  cfg.out_dir = dir.string();
  auto manifest = imaging::generate_synthetic_dataset(cfg);

  std::vector<std::vector<float>> xs;
  std::vector<int> ys;
  for (const auto& item : manifest.items) {
    if (item.split != imaging::Split::train) continue;
    auto img = imaging::load_image(item.path);
    std::vector<float> x(img.data.size() + 1);
    for (size_t i = 0; i < img.data.size(); ++i) x[i] = img.data[i] / 255.0f - 0.5f;
    x.back() = 1.0f;  // bias feature
    xs.push_back(std::move(x));
    ys.push_back(item.label);
  }

  const int n = static_cast<int>(xs.size());
  const int d = static_cast<int>(xs[0].size());
  const int k = 3;
  std::vector<float> w(static_cast<size_t>(d) * k, 0.0f);

  // full-batch gradient descent on softmax cross-entropy
  for (int iter = 0; iter < 1500; ++iter) {
    std::vector<float> grad(w.size(), 0.0f);
    for (int i = 0; i < n; ++i) {
      float logits[3] = {0, 0, 0};
      kernels::matmul_f32(xs[i].data(), w.data(), logits, 1, d, k, false);
      float mx = std::max({logits[0], logits[1], logits[2]});
      float sum = 0;
      float p[3];
      for (int j = 0; j < k; ++j) {
        p[j] = std::exp(logits[j] - mx);
        sum += p[j];
      }
      for (int j = 0; j < k; ++j) {
        float err = p[j] / sum - (j == ys[i] ? 1.0f : 0.0f);
        for (int f = 0; f < d; ++f) grad[static_cast<size_t>(f) * k + j] += err * xs[i][f];
      }
    }
    for (size_t j = 0; j < w.size(); ++j) w[j] -= 2.0f / n * grad[j];
  }

  int correct = 0;
  for (int i = 0; i < n; ++i) {
    float logits[3] = {0, 0, 0};
    kernels::matmul_f32(xs[i].data(), w.data(), logits, 1, d, k, false);
    int arg = 0;
    for (int j = 1; j < k; ++j)
      if (logits[j] > logits[arg]) arg = j;
    if (arg == ys[i]) ++correct;
  }
  double acc = static_cast<double>(correct) / n;
  CHECK(acc >= 0.95);
}

TEST_CASE("smooth gradient images stay in band and are highly correlated") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    auto img = imaging::smooth_gradient_image(64, seed);
    for (uint8_t v : img.data) {
      REQUIRE(v >= 160);
      REQUIRE(v <= 235);
    }
  }
}

}  // TEST_SUITE
