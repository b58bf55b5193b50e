#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cryptovit/imaging.hpp"

namespace cryptovit::vit {

struct ViTConfig {
  int image_size = 64;
  int patch_size = 8;
  int embed_dim = 64;
  int depth = 4;
  int heads = 4;
  int mlp_ratio = 2;
  int n_classes = 3;
  double dropout = 0.0;

  void validate() const;
  int grid_side() const { return image_size / patch_size; }
  int n_patches() const { return grid_side() * grid_side(); }
  int tokens() const { return n_patches() + 1; }
  int patch_dim() const { return patch_size * patch_size * 3; }
  int mlp_hidden() const { return embed_dim * mlp_ratio; }
  int head_dim() const { return embed_dim / heads; }
  uint64_t hash() const;

  nlohmann::json to_json() const;
  static ViTConfig from_json(const nlohmann::json& j);

  bool operator==(const ViTConfig&) const = default;
};

template <class T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, T(0)) {}

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }
  T& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  T at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
  T* row(int i) { return v.data() + static_cast<size_t>(i) * cols; }
  const T* row(int i) const { return v.data() + static_cast<size_t>(i) * cols; }
  size_t size() const { return v.size(); }

  bool operator==(const Mat&) const = default;
};

template <class T>
Mat<T> transposed(const Mat<T>& m);

template <class T>
struct LayerParams {
  Mat<T> ln1_g, ln1_b;
  Mat<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Mat<T> ln2_g, ln2_b;
  Mat<T> w1, b1, w2, b2;
};

template <class T>
struct ViTParams {
  Mat<T> patch_proj;  // patch_dim x D
  Mat<T> cls_token;   // 1 x D
  Mat<T> pos_embed;   // tokens x D
  std::vector<LayerParams<T>> layers;
  Mat<T> lnf_g, lnf_b;
  Mat<T> head_w;  // D x n_classes
  Mat<T> head_b;  // 1 x n_classes

  // Visits every tensor in a fixed, documented order (the checkpoint
  // container and the optimizer state rely on it).
  template <class F>
  void for_each(F&& f) {
    f("patch_proj", patch_proj);
    f("cls_token", cls_token);
    f("pos_embed", pos_embed);
    for (size_t l = 0; l < layers.size(); ++l) {
      auto& lp = layers[l];
      std::string p = "layer" + std::to_string(l) + ".";
      f((p + "ln1_g").c_str(), lp.ln1_g);
      f((p + "ln1_b").c_str(), lp.ln1_b);
      f((p + "wq").c_str(), lp.wq);
      f((p + "bq").c_str(), lp.bq);
      f((p + "wk").c_str(), lp.wk);
      f((p + "bk").c_str(), lp.bk);
      f((p + "wv").c_str(), lp.wv);
      f((p + "bv").c_str(), lp.bv);
      f((p + "wo").c_str(), lp.wo);
      f((p + "bo").c_str(), lp.bo);
      f((p + "ln2_g").c_str(), lp.ln2_g);
      f((p + "ln2_b").c_str(), lp.ln2_b);
      f((p + "w1").c_str(), lp.w1);
      f((p + "b1").c_str(), lp.b1);
      f((p + "w2").c_str(), lp.w2);
      f((p + "b2").c_str(), lp.b2);
    }
    f("lnf_g", lnf_g);
    f("lnf_b", lnf_b);
    f("head_w", head_w);
    f("head_b", head_b);
  }

  template <class F>
  void for_each(F&& f) const {
    const_cast<ViTParams*>(this)->for_each(
        [&](const char* name, Mat<T>& m) { f(name, static_cast<const Mat<T>&>(m)); });
  }
};

using Grads = ViTParams<double>;

template <class T>
ViTParams<T> init_params(const ViTConfig& cfg, uint64_t seed);

// Gradient buffers shaped like the parameters, zero-filled.
template <class T>
ViTParams<double> make_grads(const ViTParams<T>& like);

// --- forward pieces (exposed for tests) --------------------------------

// n_patches x patch_dim, values scaled to [0,1]
template <class T>
Mat<T> image_to_patch_matrix(const imaging::ImageBuffer& img, const ViTConfig& cfg);

// [cls; patch_i E; ...] + pos_embed
template <class T>
Mat<T> embed(const imaging::ImageBuffer& img, const ViTParams<T>& params, const ViTConfig& cfg);

// Pre-norm block: x + MSA(LN(x)), then + MLP(LN(.)). Shape preserved.
template <class T>
Mat<T> encoder_layer(const Mat<T>& x, const LayerParams<T>& lp, const ViTConfig& cfg);

// y, xhat, rstd; affine applied to y. Stats accumulate in double.
template <class T>
void layer_norm(const Mat<T>& x, const Mat<T>& g, const Mat<T>& b, Mat<T>& y, Mat<T>& xhat,
                std::vector<T>& rstd);

template <class T>
void softmax_rows(Mat<T>& m);

template <class T>
std::vector<T> forward(const imaging::ImageBuffer& img, const ViTParams<T>& params,
                       const ViTConfig& cfg);

// --- training -----------------------------------------------------------

struct Batch {
  std::vector<const imaging::ImageBuffer*> images;
  std::vector<int> labels;
};

// Mean cross-entropy over the batch; gradient sums accumulate in double and
// are scaled by 1/batch at the end. Returns the loss.
template <class T>
double loss_and_grads(const Batch& batch, const ViTParams<T>& params, const ViTConfig& cfg,
                      ViTParams<double>& grads);

struct Hyper {
  int epochs = 30;
  int batch_size = 16;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  uint64_t seed = 0;

  nlohmann::json to_json() const;
  static Hyper from_json(const nlohmann::json& j);
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double train_acc = 0;
  double val_loss = 0;
  double val_acc = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0;
  uint64_t seed = 0;
  uint64_t config_hash = 0;
  std::string backend;
  int best_epoch = 0;
  double best_val_acc = 0;
  bool deterministic = true;  // single-threaded mode; always true here

  nlohmann::json to_json() const;
};

struct TrainedModel {
  ViTParams<float> final_params;
  ViTParams<float> best_params;
  TrainReport report;
};

// Mini-batch Adam on cross-entropy. Single-threaded and bit-reproducible
// for a fixed seed. Aborts with a diagnostic if the loss goes non-finite.
TrainedModel train(const std::vector<imaging::ImageBuffer>& train_images,
                   const std::vector<int>& train_labels,
                   const std::vector<imaging::ImageBuffer>& val_images,
                   const std::vector<int>& val_labels, const ViTConfig& cfg, const Hyper& hyper);

struct EvalResult {
  double accuracy = 0;
  double mean_loss = 0;
  std::vector<std::vector<int>> confusion;  // [true][predicted]
};

EvalResult evaluate(const ViTParams<float>& params, const ViTConfig& cfg,
                    const std::vector<imaging::ImageBuffer>& images,
                    const std::vector<int>& labels);

// --- checkpoints ----------------------------------------------------------

// Little-endian container: magic "CVPT", u32 version, u32 header length,
// JSON header (config + tensor table), then raw float32 data. Round trips
// bit-exactly.
void save_checkpoint(const ViTParams<float>& params, const ViTConfig& cfg,
                     const std::string& path);
std::pair<ViTParams<float>, ViTConfig> load_checkpoint(const std::string& path);

}  // namespace cryptovit::vit
