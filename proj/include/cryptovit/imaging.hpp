#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cryptovit::imaging {

// 8-bit, 3-channel, row-major interleaved RGB.
struct ImageBuffer {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<uint8_t> data;

  ImageBuffer() = default;
  ImageBuffer(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0) {}

  uint8_t& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  uint8_t at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  uint8_t* pixel(int y, int x) { return data.data() + (static_cast<size_t>(y) * width + x) * 3; }
  const uint8_t* pixel(int y, int x) const {
    return data.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
  size_t pixel_count() const { return static_cast<size_t>(height) * width; }

  bool operator==(const ImageBuffer&) const = default;
};

struct PatchGrid {
  int patch_size = 0;
  int rows = 0;
  int cols = 0;
  std::vector<ImageBuffer> patches;  // row-major patch order

  int patch_count() const { return rows * cols; }
};

// --- I/O -------------------------------------------------------------

// PNG or binary PPM/PGM, by content sniffing. Grayscale is replicated
// across the three channels. Lossless only; anything else is refused.
ImageBuffer load_image(const std::string& path);

// Format chosen by extension: .png or .ppm
void save_image(const ImageBuffer& img, const std::string& path);

void save_ppm(const ImageBuffer& img, const std::string& path);
ImageBuffer load_ppm(const std::string& path);

// --- geometry --------------------------------------------------------

// Center-crop to square, then nearest-neighbor resize to target x target.
// target must be divisible by patch_size (config check lives here because
// the result feeds straight into partition()).
ImageBuffer normalize_geometry(const ImageBuffer& img, int target, int patch_size);

PatchGrid partition(const ImageBuffer& img, int patch_size);
ImageBuffer reassemble(const PatchGrid& grid);

// --- dataset ----------------------------------------------------------

enum class Split { train, val };

struct DatasetItem {
  std::string path;
  int label = 0;
  Split split = Split::train;
  bool poisoned = false;
  std::string client_id;  // set by federation pooling; empty otherwise
};

struct DatasetManifest {
  std::string name;
  std::vector<std::string> classes;
  std::vector<DatasetItem> items;
  double train_fraction = 0.8;
  double val_fraction = 0.2;

  std::vector<size_t> indices(Split s) const;
  void validate() const;
};

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

struct SynthConfig {
  int n_classes = 3;
  int per_class = 125;
  int size = 64;
  uint64_t seed = 0;
  double train_fraction = 0.8;
  double noise_sigma = 4.0;
  double contrast = 1.0;  // scales background dynamics; >1 gives wider-range images
  std::string out_dir;
};

// Renders geometric-shape classes (ellipse, rectangle, cross, ...) over
// smooth gradient backgrounds, writes PNGs plus manifest.json, and returns
// the manifest. Deterministic in the seed.
DatasetManifest generate_synthetic_dataset(const SynthConfig& cfg);

// Smooth near-gray gradient images used by the reconstruction-attack
// sanity checks; values stay inside [160, 235] so the greedy scan never
// straddles the inversion midpoint.
ImageBuffer smooth_gradient_image(int size, uint64_t seed);

const std::vector<std::string>& shape_class_names();

}  // namespace cryptovit::imaging
