#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cryptovit/common.hpp"
#include "cryptovit/imaging.hpp"
#include "cryptovit/rng.hpp"

namespace fs = std::filesystem;

namespace cryptovit::imaging {

ImageBuffer normalize_geometry(const ImageBuffer& img, int target, int patch_size) {
  if (patch_size < 1 || target < 1 || target % patch_size != 0)
    fail(Errc::config, "normalize_geometry: target must be divisible by patch_size");

  // center crop to square
  int side = std::min(img.height, img.width);
  int y0 = (img.height - side) / 2;
  int x0 = (img.width - side) / 2;

  ImageBuffer out(target, target);
  for (int y = 0; y < target; ++y) {
    int sy = y0 + static_cast<int>(static_cast<int64_t>(y) * side / target);
    for (int x = 0; x < target; ++x) {
      int sx = x0 + static_cast<int>(static_cast<int64_t>(x) * side / target);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

PatchGrid partition(const ImageBuffer& img, int patch_size) {
  if (patch_size < 1 || img.height % patch_size != 0 || img.width % patch_size != 0)
    fail(Errc::geometry, "partition: image dimensions must be divisible by patch_size");

  PatchGrid grid;
  grid.patch_size = patch_size;
  grid.rows = img.height / patch_size;
  grid.cols = img.width / patch_size;
  grid.patches.reserve(static_cast<size_t>(grid.rows) * grid.cols);
  for (int pr = 0; pr < grid.rows; ++pr) {
    for (int pc = 0; pc < grid.cols; ++pc) {
      ImageBuffer patch(patch_size, patch_size);
      for (int y = 0; y < patch_size; ++y) {
        const uint8_t* src = img.pixel(pr * patch_size + y, pc * patch_size);
        std::copy(src, src + static_cast<size_t>(patch_size) * 3, patch.pixel(y, 0));
      }
      grid.patches.push_back(std::move(patch));
    }
  }
  return grid;
}

ImageBuffer reassemble(const PatchGrid& grid) {
  if (grid.patch_size < 1 || grid.rows < 1 || grid.cols < 1 ||
      grid.patches.size() != static_cast<size_t>(grid.rows) * grid.cols)
    fail(Errc::geometry, "reassemble: malformed grid");
  for (const auto& p : grid.patches)
    if (p.height != grid.patch_size || p.width != grid.patch_size)
      fail(Errc::geometry, "reassemble: inconsistent patch sizes");

  ImageBuffer img(grid.rows * grid.patch_size, grid.cols * grid.patch_size);
  for (int pr = 0; pr < grid.rows; ++pr) {
    for (int pc = 0; pc < grid.cols; ++pc) {
      const ImageBuffer& patch = grid.patches[static_cast<size_t>(pr) * grid.cols + pc];
      for (int y = 0; y < grid.patch_size; ++y) {
        const uint8_t* src = patch.pixel(y, 0);
        std::copy(src, src + static_cast<size_t>(grid.patch_size) * 3,
                  img.pixel(pr * grid.patch_size + y, pc * grid.patch_size));
      }
    }
  }
  return img;
}

// --- manifest ----------------------------------------------------------

std::vector<size_t> DatasetManifest::indices(Split s) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < items.size(); ++i)
    if (items[i].split == s) out.push_back(i);
  return out;
}

void DatasetManifest::validate() const {
  if (classes.empty()) fail(Errc::validation, "manifest has no classes");
  for (const auto& item : items)
    if (item.label < 0 || item.label >= static_cast<int>(classes.size()))
      fail(Errc::validation, "manifest item label out of range: " + item.path);
  if (std::abs(train_fraction + val_fraction - 1.0) > 1e-9)
    fail(Errc::validation, "split fractions must sum to 1");
}

static const char* split_name(Split s) { return s == Split::train ? "train" : "val"; }

static Split split_from(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  fail(Errc::validation, "unknown split: " + s);
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  m.validate();
  nlohmann::json j;
  j["name"] = m.name;
  j["classes"] = m.classes;
  j["split"] = {{"train", m.train_fraction}, {"val", m.val_fraction}};
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : m.items) {
    nlohmann::json ji = {{"path", it.path}, {"label", it.label}, {"split", split_name(it.split)}};
    if (it.poisoned) ji["poisoned"] = true;
    if (!it.client_id.empty()) ji["client_id"] = it.client_id;
    items.push_back(std::move(ji));
  }
  j["items"] = std::move(items);
  std::ofstream out(path);
  if (!out) fail(Errc::io_missing, "cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_missing, "manifest not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io_corrupt, "malformed manifest " + path + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.train_fraction = j.at("split").at("train").get<double>();
    m.val_fraction = j.at("split").at("val").get<double>();
    for (const auto& ji : j.at("items")) {
      DatasetItem it;
      it.path = ji.at("path").get<std::string>();
      it.label = ji.at("label").get<int>();
      it.split = split_from(ji.at("split").get<std::string>());
      it.poisoned = ji.value("poisoned", false);
      it.client_id = ji.value("client_id", std::string());
      m.items.push_back(std::move(it));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::validation, "manifest schema error in " + path + ": " + e.what());
  }
  m.validate();
  return m;
}

// --- synthetic dataset --------------------------------------------------

const std::vector<std::string>& shape_class_names() {
  static const std::vector<std::string> names = {"ellipse", "rectangle", "cross",
                                                 "triangle", "ring",      "stripes"};
  return names;
}

namespace {

struct Shape {
  int kind;
  double cx, cy;     // center, pixel units
  double scale;      // half-extent, pixel units
  double angle;      // radians
  double delta;      // luma offset inside the shape
};

// signed membership test in the shape's local frame; 1 inside, 0 outside
bool inside(const Shape& s, double px, double py) {
  double dx = px - s.cx;
  double dy = py - s.cy;
  double ca = std::cos(s.angle), sa = std::sin(s.angle);
  double x = (ca * dx + sa * dy) / s.scale;
  double y = (-sa * dx + ca * dy) / s.scale;
  switch (s.kind) {
    case 0:  // ellipse, 3:2 aspect
      return (x * x) / 1.0 + (y * y) / (0.44) <= 1.0;
    case 1:  // rectangle
      return std::abs(x) <= 1.0 && std::abs(y) <= 0.62;
    case 2:  // cross
      return (std::abs(x) <= 0.32 && std::abs(y) <= 1.0) ||
             (std::abs(y) <= 0.32 && std::abs(x) <= 1.0);
    case 3:  // triangle (upward)
      return y <= 1.0 && y >= -1.0 && std::abs(x) <= (1.0 - (y + 1.0) / 2.0);
    case 4: {  // ring
      double r2 = x * x + y * y;
      return r2 <= 1.0 && r2 >= 0.45;
    }
    case 5:  // stripes
      return std::abs(x) <= 1.0 && std::abs(y) <= 1.0 &&
             (static_cast<int>(std::floor((x + 1.0) * 3.0)) % 2 == 0);
    default:
      return false;
  }
}

ImageBuffer render_class_image(int size, int kind, rng::Rng& rng, double noise_sigma,
                               double contrast) {
  // smooth background: shared luma plane plus small per-channel offsets
  double base = 105 + rng.uniform(-20, 20) * contrast;
  double gx = rng.uniform(-25, 25) * contrast;
  double gy = rng.uniform(-25, 25) * contrast;
  double off[3] = {rng.uniform(-12, 12), rng.uniform(-12, 12), rng.uniform(-12, 12)};

  Shape s;
  s.kind = kind;
  s.cx = size * rng.uniform(0.40, 0.60);
  s.cy = size * rng.uniform(0.40, 0.60);
  s.scale = size * rng.uniform(0.24, 0.36);
  s.angle = 0.0;
  s.delta = rng.uniform(80, 110);  // shapes render brighter than the background

  ImageBuffer img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      // 2x2 supersampling for soft edges
      double cov = 0.0;
      for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx)
          cov += inside(s, x + 0.25 + 0.5 * sx, y + 0.25 + 0.5 * sy) ? 0.25 : 0.0;
      double luma = base + gx * (static_cast<double>(x) / size) +
                    gy * (static_cast<double>(y) / size) + cov * s.delta;
      for (int c = 0; c < 3; ++c) {
        double v = luma + off[c] + (noise_sigma > 0 ? rng.gaussian(0, noise_sigma) : 0.0);
        img.at(y, x, c) = static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
      }
    }
  }
  return img;
}

}  // namespace

ImageBuffer smooth_gradient_image(int size, uint64_t seed) {
  rng::Rng rng(seed, "smooth-gradient");
  double lo = 160, hi = 235;
  double base = rng.uniform(lo + 10, hi - 35);
  double gx = rng.uniform(-25, 25);
  double gy = rng.uniform(-25, 25);
  double off[3] = {rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-6, 6)};
  ImageBuffer img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double luma = base + gx * (static_cast<double>(x) / size) +
                    gy * (static_cast<double>(y) / size);
      for (int c = 0; c < 3; ++c) {
        double v = std::clamp(luma + off[c] + rng.gaussian(0, 1.0), lo, hi);
        img.at(y, x, c) = static_cast<uint8_t>(std::lround(v));
      }
    }
  }
  return img;
}

DatasetManifest generate_synthetic_dataset(const SynthConfig& cfg) {
  if (cfg.n_classes < 2) fail(Errc::config, "synthetic dataset needs >= 2 classes");
  if (cfg.per_class < 20) fail(Errc::config, "synthetic dataset needs >= 20 images per class");
  if (cfg.n_classes > static_cast<int>(shape_class_names().size()))
    fail(Errc::config, "at most 6 shape classes are available");

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (!fs::is_directory(cfg.out_dir))
    fail(Errc::io_missing, "cannot create output directory: " + cfg.out_dir);

  DatasetManifest m;
  m.name = "synth-shapes";
  m.train_fraction = cfg.train_fraction;
  m.val_fraction = 1.0 - cfg.train_fraction;
  for (int c = 0; c < cfg.n_classes; ++c) m.classes.push_back(shape_class_names()[c]);

  rng::Rng render_rng(cfg.seed, "synth-render");
  int n_train_per_class = static_cast<int>(std::lround(cfg.per_class * cfg.train_fraction));

  for (int c = 0; c < cfg.n_classes; ++c) {
    // stratified split: a seeded permutation of each class decides who
    // lands in train vs val
    rng::Rng split_rng(sub_seed(cfg.seed, "synth-split-" + std::to_string(c)), "synth-split");
    auto order = split_rng.permutation(static_cast<uint32_t>(cfg.per_class));
    std::vector<Split> splits(cfg.per_class, Split::val);
    for (int i = 0; i < n_train_per_class; ++i) splits[order[i]] = Split::train;

    for (int i = 0; i < cfg.per_class; ++i) {
      ImageBuffer img = render_class_image(cfg.size, c, render_rng, cfg.noise_sigma, cfg.contrast);
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04d.png", m.classes[c].c_str(), i);
      std::string path = (fs::path(cfg.out_dir) / name).string();
      save_image(img, path);
      DatasetItem item;
      item.path = path;
      item.label = c;
      item.split = splits[i];
      m.items.push_back(std::move(item));
    }
  }

  save_manifest(m, (fs::path(cfg.out_dir) / "manifest.json").string());
  return m;
}

}  // namespace cryptovit::imaging
