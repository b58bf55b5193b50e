#include "cryptovit/vit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cryptovit/common.hpp"
#include "cryptovit/kernels.hpp"
#include "cryptovit/rng.hpp"

namespace cryptovit::vit {

using imaging::ImageBuffer;

// --- config ----------------------------------------------------------------

void ViTConfig::validate() const {
  if (image_size < 1 || patch_size < 1 || image_size % patch_size != 0)
    fail(Errc::config, "image_size must be divisible by patch_size");
  if (embed_dim < 1 || heads < 1 || embed_dim % heads != 0)
    fail(Errc::config, "embed_dim must be divisible by heads");
  if (depth < 1) fail(Errc::config, "depth must be >= 1");
  if (mlp_ratio < 1) fail(Errc::config, "mlp_ratio must be >= 1");
  if (n_classes < 2) fail(Errc::config, "n_classes must be >= 2");
  if (dropout < 0.0 || dropout >= 1.0) fail(Errc::config, "dropout must be in [0,1)");
}

nlohmann::json ViTConfig::to_json() const {
  return nlohmann::json{{"image_size", image_size}, {"patch_size", patch_size},
                        {"embed_dim", embed_dim},   {"depth", depth},
                        {"heads", heads},           {"mlp_ratio", mlp_ratio},
                        {"n_classes", n_classes},   {"dropout", dropout}};
}

ViTConfig ViTConfig::from_json(const nlohmann::json& j) {
  ViTConfig c;
  c.image_size = j.at("image_size").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.depth = j.at("depth").get<int>();
  c.heads = j.at("heads").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<int>();
  c.n_classes = j.at("n_classes").get<int>();
  c.dropout = j.value("dropout", 0.0);
  c.validate();
  return c;
}

uint64_t ViTConfig::hash() const { return fnv1a64(to_json().dump()); }

// --- small linear algebra helpers -------------------------------------------

template <class T>
Mat<T> transposed(const Mat<T>& m) {
  Mat<T> t(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
  return t;
}
template Mat<float> transposed(const Mat<float>&);
template Mat<double> transposed(const Mat<double>&);

namespace {

template <class T>
Mat<T> mm(const Mat<T>& a, const Mat<T>& b) {
  if (a.cols != b.rows) fail(Errc::numeric, "matmul shape mismatch");
  Mat<T> c(a.rows, b.cols);
  kernels::matmul<T>(a.data(), b.data(), c.data(), a.rows, a.cols, b.cols, false);
  return c;
}

template <class T>
void mm_acc(const Mat<T>& a, const Mat<T>& b, Mat<T>& c) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    fail(Errc::numeric, "matmul shape mismatch");
  kernels::matmul<T>(a.data(), b.data(), c.data(), a.rows, a.cols, b.cols, true);
}

template <class T>
void add_bias_rows(Mat<T>& y, const Mat<T>& b) {
  for (int i = 0; i < y.rows; ++i) {
    T* row = y.row(i);
    for (int j = 0; j < y.cols; ++j) row[j] += b.data()[j];
  }
}

template <class T>
void add_inplace(Mat<T>& a, const Mat<T>& b) {
  for (size_t i = 0; i < a.size(); ++i) a.v[i] += b.v[i];
}

// grads accumulate in double regardless of the model precision
template <class T>
void acc_grad(Mat<double>& g, const Mat<T>& local) {
  for (size_t i = 0; i < g.size(); ++i) g.v[i] += static_cast<double>(local.v[i]);
}

template <class T>
void acc_colsum(Mat<double>& g, const Mat<T>& m) {
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) g.v[j] += static_cast<double>(m.at(i, j));
}

// weight gradient g (In x Out) += x^T (In x N) @ d (N x Out)
template <class T>
void mm_accumulate_weight(Mat<double>& g, const Mat<T>& x, const Mat<T>& d) {
  Mat<T> xt = transposed(x);
  Mat<T> local(g.rows, g.cols);
  kernels::matmul<T>(xt.data(), d.data(), local.data(), g.rows, x.rows, g.cols, false);
  acc_grad(g, local);
}

constexpr double kLnEps = 1e-5;

template <class T>
T gelu_fwd(T x) {
  const T c = T(0.7978845608028654);  // sqrt(2/pi)
  const T a = T(0.044715);
  T u = c * (x + a * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <class T>
T gelu_bwd(T x) {
  const T c = T(0.7978845608028654);
  const T a = T(0.044715);
  T u = c * (x + a * x * x * x);
  T t = std::tanh(u);
  T du = c * (T(1) + T(3) * a * x * x);
  return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
}

}  // namespace

// --- exposed primitives -----------------------------------------------------

template <class T>
void layer_norm(const Mat<T>& x, const Mat<T>& g, const Mat<T>& b, Mat<T>& y, Mat<T>& xhat,
                std::vector<T>& rstd) {
  y = Mat<T>(x.rows, x.cols);
  xhat = Mat<T>(x.rows, x.cols);
  rstd.assign(x.rows, T(0));
  const int d = x.cols;
  for (int i = 0; i < x.rows; ++i) {
    const T* row = x.row(i);
    double mean = 0;
    for (int j = 0; j < d; ++j) mean += row[j];
    mean /= d;
    double var = 0;
    for (int j = 0; j < d; ++j) {
      double dv = row[j] - mean;
      var += dv * dv;
    }
    var /= d;
    double rs = 1.0 / std::sqrt(var + kLnEps);
    rstd[i] = static_cast<T>(rs);
    for (int j = 0; j < d; ++j) {
      T xh = static_cast<T>((row[j] - mean) * rs);
      xhat.at(i, j) = xh;
      y.at(i, j) = xh * g.data()[j] + b.data()[j];
    }
  }
}
template void layer_norm(const Mat<float>&, const Mat<float>&, const Mat<float>&, Mat<float>&,
                         Mat<float>&, std::vector<float>&);
template void layer_norm(const Mat<double>&, const Mat<double>&, const Mat<double>&, Mat<double>&,
                         Mat<double>&, std::vector<double>&);

template <class T>
void softmax_rows(Mat<T>& m) {
  for (int i = 0; i < m.rows; ++i) {
    T* row = m.row(i);
    T mx = row[0];
    for (int j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (int j = 0; j < m.cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    T inv = T(1) / sum;
    for (int j = 0; j < m.cols; ++j) row[j] *= inv;
  }
}
template void softmax_rows(Mat<float>&);
template void softmax_rows(Mat<double>&);

template <class T>
Mat<T> image_to_patch_matrix(const ImageBuffer& img, const ViTConfig& cfg) {
  if (img.height != cfg.image_size || img.width != cfg.image_size)
    fail(Errc::geometry, "image geometry does not match the model config");
  const int ps = cfg.patch_size;
  const int side = cfg.grid_side();
  Mat<T> out(cfg.n_patches(), cfg.patch_dim());
  const T scale = T(1) / T(255);
  for (int pr = 0; pr < side; ++pr) {
    for (int pc = 0; pc < side; ++pc) {
      T* row = out.row(pr * side + pc);
      int idx = 0;
      for (int y = 0; y < ps; ++y)
        for (int x = 0; x < ps; ++x)
          for (int c = 0; c < 3; ++c)
            row[idx++] = scale * T(img.at(pr * ps + y, pc * ps + x, c));
    }
  }
  return out;
}
template Mat<float> image_to_patch_matrix(const ImageBuffer&, const ViTConfig&);
template Mat<double> image_to_patch_matrix(const ImageBuffer&, const ViTConfig&);

// --- parameters --------------------------------------------------------------

template <class T>
ViTParams<T> init_params(const ViTConfig& cfg, uint64_t seed) {
  cfg.validate();
  rng::Rng rng(seed, "vit-init");
  const int d = cfg.embed_dim;

  // fan-scaled init keeps activations near unit variance at desk widths,
  // which the short training budget depends on
  auto xavier_mat = [&](int r, int c) {
    Mat<T> m(r, c);
    double std = std::sqrt(2.0 / (r + c));
    for (auto& x : m.v) x = static_cast<T>(rng.gaussian(0.0, std));
    return m;
  };
  auto small_mat = [&](int r, int c) {
    Mat<T> m(r, c);
    for (auto& x : m.v) x = static_cast<T>(rng.gaussian(0.0, 0.02));
    return m;
  };
  auto pos_mat = [&](int r, int c) {
    // position identity must be visible against patch features from step
    // one; ciphertext features are bound to their grid position
    Mat<T> m(r, c);
    for (auto& x : m.v) x = static_cast<T>(rng.gaussian(0.0, 0.2));
    return m;
  };
  auto zeros = [](int r, int c) { return Mat<T>(r, c); };
  auto ones = [](int r, int c) {
    Mat<T> m(r, c);
    std::fill(m.v.begin(), m.v.end(), T(1));
    return m;
  };

  ViTParams<T> p;
  p.patch_proj = xavier_mat(cfg.patch_dim(), d);
  p.cls_token = small_mat(1, d);
  p.pos_embed = pos_mat(cfg.tokens(), d);
  p.layers.resize(cfg.depth);
  for (auto& lp : p.layers) {
    lp.ln1_g = ones(1, d);
    lp.ln1_b = zeros(1, d);
    lp.wq = xavier_mat(d, d);
    lp.bq = zeros(1, d);
    lp.wk = xavier_mat(d, d);
    lp.bk = zeros(1, d);
    lp.wv = xavier_mat(d, d);
    lp.bv = zeros(1, d);
    lp.wo = xavier_mat(d, d);
    lp.bo = zeros(1, d);
    lp.ln2_g = ones(1, d);
    lp.ln2_b = zeros(1, d);
    lp.w1 = xavier_mat(d, cfg.mlp_hidden());
    lp.b1 = zeros(1, cfg.mlp_hidden());
    lp.w2 = xavier_mat(cfg.mlp_hidden(), d);
    lp.b2 = zeros(1, d);
  }
  p.lnf_g = ones(1, d);
  p.lnf_b = zeros(1, d);
  p.head_w = xavier_mat(d, cfg.n_classes);
  p.head_b = zeros(1, cfg.n_classes);
  return p;
}
template ViTParams<float> init_params(const ViTConfig&, uint64_t);
template ViTParams<double> init_params(const ViTConfig&, uint64_t);

template <class T>
ViTParams<double> make_grads(const ViTParams<T>& like) {
  ViTParams<double> g;
  auto shape = [](const Mat<T>& m) { return Mat<double>(m.rows, m.cols); };
  g.patch_proj = shape(like.patch_proj);
  g.cls_token = shape(like.cls_token);
  g.pos_embed = shape(like.pos_embed);
  g.layers.resize(like.layers.size());
  for (size_t l = 0; l < like.layers.size(); ++l) {
    const auto& s = like.layers[l];
    auto& d = g.layers[l];
    d.ln1_g = shape(s.ln1_g);
    d.ln1_b = shape(s.ln1_b);
    d.wq = shape(s.wq);
    d.bq = shape(s.bq);
    d.wk = shape(s.wk);
    d.bk = shape(s.bk);
    d.wv = shape(s.wv);
    d.bv = shape(s.bv);
    d.wo = shape(s.wo);
    d.bo = shape(s.bo);
    d.ln2_g = shape(s.ln2_g);
    d.ln2_b = shape(s.ln2_b);
    d.w1 = shape(s.w1);
    d.b1 = shape(s.b1);
    d.w2 = shape(s.w2);
    d.b2 = shape(s.b2);
  }
  g.lnf_g = shape(like.lnf_g);
  g.lnf_b = shape(like.lnf_b);
  g.head_w = shape(like.head_w);
  g.head_b = shape(like.head_b);
  return g;
}
template ViTParams<double> make_grads(const ViTParams<float>&);
template ViTParams<double> make_grads(const ViTParams<double>&);

// --- forward with caches -------------------------------------------------

namespace {

template <class T>
struct LayerCache {
  Mat<T> x_in;
  Mat<T> ln1_out, ln1_xhat;
  std::vector<T> ln1_rstd;
  Mat<T> q, k, v;
  std::vector<Mat<T>> attn;  // per head, N x N
  Mat<T> attn_out;           // N x D pre-projection
  Mat<T> x_mid;
  Mat<T> ln2_out, ln2_xhat;
  std::vector<T> ln2_rstd;
  Mat<T> mlp_pre, mlp_act;
  std::vector<uint8_t> drop_attn, drop_mlp;  // kept-element masks, empty if unused
};

template <class T>
struct ForwardCache {
  Mat<T> patches;
  Mat<T> x0;
  std::vector<uint8_t> drop_embed;
  std::vector<LayerCache<T>> layers;
  Mat<T> lnf_out, lnf_xhat;
  std::vector<T> lnf_rstd;
  std::vector<T> logits;
};

template <class T>
Mat<T> copy_head(const Mat<T>& m, int head, int dh) {
  Mat<T> out(m.rows, dh);
  for (int i = 0; i < m.rows; ++i) {
    const T* src = m.row(i) + head * dh;
    std::copy(src, src + dh, out.row(i));
  }
  return out;
}

template <class T>
void paste_head(Mat<T>& dst, const Mat<T>& h, int head, int dh) {
  for (int i = 0; i < dst.rows; ++i) {
    const T* src = h.row(i);
    std::copy(src, src + dh, dst.row(i) + head * dh);
  }
}

// inverted dropout; mask bytes record kept elements
template <class T>
void apply_dropout(Mat<T>& m, double rate, rng::Rng* rng, std::vector<uint8_t>& mask) {
  if (!rng || rate <= 0.0) return;
  mask.resize(m.size());
  const T scale = T(1.0 / (1.0 - rate));
  for (size_t i = 0; i < m.size(); ++i) {
    bool keep = rng->uniform01() >= rate;
    mask[i] = keep ? 1 : 0;
    m.v[i] = keep ? m.v[i] * scale : T(0);
  }
}

template <class T>
void dropout_backward(Mat<T>& d, double rate, const std::vector<uint8_t>& mask) {
  if (mask.empty()) return;
  const T scale = T(1.0 / (1.0 - rate));
  for (size_t i = 0; i < d.size(); ++i) d.v[i] = mask[i] ? d.v[i] * scale : T(0);
}

template <class T>
void forward_impl(const ImageBuffer& img, const ViTParams<T>& params, const ViTConfig& cfg,
                  ForwardCache<T>& fc, rng::Rng* drop_rng) {
  const int n_tok = cfg.tokens();
  const int d = cfg.embed_dim;
  const int dh = cfg.head_dim();
  const T attn_scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));

  fc.patches = image_to_patch_matrix<T>(img, cfg);

  fc.x0 = Mat<T>(n_tok, d);
  std::copy(params.cls_token.data(), params.cls_token.data() + d, fc.x0.row(0));
  kernels::matmul<T>(fc.patches.data(), params.patch_proj.data(), fc.x0.row(1),
                     cfg.n_patches(), cfg.patch_dim(), d, false);
  add_inplace(fc.x0, params.pos_embed);
  apply_dropout(fc.x0, cfg.dropout, drop_rng, fc.drop_embed);

  Mat<T> x = fc.x0;
  fc.layers.resize(cfg.depth);
  for (int l = 0; l < cfg.depth; ++l) {
    auto& c = fc.layers[l];
    const auto& lp = params.layers[l];
    c.x_in = x;

    layer_norm(x, lp.ln1_g, lp.ln1_b, c.ln1_out, c.ln1_xhat, c.ln1_rstd);
    c.q = mm(c.ln1_out, lp.wq);
    add_bias_rows(c.q, lp.bq);
    c.k = mm(c.ln1_out, lp.wk);
    add_bias_rows(c.k, lp.bk);
    c.v = mm(c.ln1_out, lp.wv);
    add_bias_rows(c.v, lp.bv);

    c.attn.clear();
    c.attn.reserve(cfg.heads);
    c.attn_out = Mat<T>(n_tok, d);
    for (int h = 0; h < cfg.heads; ++h) {
      Mat<T> qh = copy_head(c.q, h, dh);
      Mat<T> kh_t = transposed(copy_head(c.k, h, dh));
      Mat<T> scores = mm(qh, kh_t);
      for (auto& s : scores.v) s *= attn_scale;
      softmax_rows(scores);
      Mat<T> vh = copy_head(c.v, h, dh);
      Mat<T> oh = mm(scores, vh);
      paste_head(c.attn_out, oh, h, dh);
      c.attn.push_back(std::move(scores));
    }

    Mat<T> proj = mm(c.attn_out, lp.wo);
    add_bias_rows(proj, lp.bo);
    apply_dropout(proj, cfg.dropout, drop_rng, c.drop_attn);
    c.x_mid = x;
    add_inplace(c.x_mid, proj);

    layer_norm(c.x_mid, lp.ln2_g, lp.ln2_b, c.ln2_out, c.ln2_xhat, c.ln2_rstd);
    c.mlp_pre = mm(c.ln2_out, lp.w1);
    add_bias_rows(c.mlp_pre, lp.b1);
    c.mlp_act = Mat<T>(c.mlp_pre.rows, c.mlp_pre.cols);
    for (size_t i = 0; i < c.mlp_pre.size(); ++i) c.mlp_act.v[i] = gelu_fwd(c.mlp_pre.v[i]);
    Mat<T> mlp_out = mm(c.mlp_act, lp.w2);
    add_bias_rows(mlp_out, lp.b2);
    apply_dropout(mlp_out, cfg.dropout, drop_rng, c.drop_mlp);

    x = c.x_mid;
    add_inplace(x, mlp_out);
  }

  layer_norm(x, params.lnf_g, params.lnf_b, fc.lnf_out, fc.lnf_xhat, fc.lnf_rstd);

  fc.logits.assign(cfg.n_classes, T(0));
  kernels::matmul<T>(fc.lnf_out.row(0), params.head_w.data(), fc.logits.data(), 1, d,
                     cfg.n_classes, false);
  for (int j = 0; j < cfg.n_classes; ++j) fc.logits[j] += params.head_b.data()[j];

  for (T v : fc.logits)
    if (!std::isfinite(static_cast<double>(v)))
      fail(Errc::numeric, "non-finite activation in forward pass");
}

template <class T>
void layer_norm_backward(const Mat<T>& dy, const Mat<T>& xhat, const std::vector<T>& rstd,
                         const Mat<T>& g, Mat<T>& dx, Mat<double>& g_g, Mat<double>& g_b) {
  const int d = dy.cols;
  dx = Mat<T>(dy.rows, dy.cols);
  for (int i = 0; i < dy.rows; ++i) {
    const T* dyr = dy.row(i);
    const T* xhr = xhat.row(i);
    double m1 = 0, m2 = 0;
    for (int j = 0; j < d; ++j) {
      double dxh = static_cast<double>(dyr[j]) * static_cast<double>(g.data()[j]);
      m1 += dxh;
      m2 += dxh * static_cast<double>(xhr[j]);
      g_g.v[j] += static_cast<double>(dyr[j]) * static_cast<double>(xhr[j]);
      g_b.v[j] += static_cast<double>(dyr[j]);
    }
    m1 /= d;
    m2 /= d;
    for (int j = 0; j < d; ++j) {
      double dxh = static_cast<double>(dyr[j]) * static_cast<double>(g.data()[j]);
      dx.at(i, j) =
          static_cast<T>(static_cast<double>(rstd[i]) * (dxh - m1 - static_cast<double>(xhr[j]) * m2));
    }
  }
}

// Backward for one item; accumulates raw (unscaled) gradient sums.
template <class T>
void backward_impl(const ViTParams<T>& params, const ViTConfig& cfg, const ForwardCache<T>& fc,
                   const std::vector<T>& dlogits, ViTParams<double>& grads) {
  const int n_tok = cfg.tokens();
  const int d = cfg.embed_dim;
  const int dh = cfg.head_dim();
  const T attn_scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));

  // head
  for (int j = 0; j < cfg.n_classes; ++j) grads.head_b.v[j] += static_cast<double>(dlogits[j]);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < cfg.n_classes; ++j)
      grads.head_w.at(i, j) +=
          static_cast<double>(fc.lnf_out.at(0, i)) * static_cast<double>(dlogits[j]);

  Mat<T> d_lnf_out(n_tok, d);
  for (int i = 0; i < d; ++i) {
    T acc = T(0);
    for (int j = 0; j < cfg.n_classes; ++j) acc += dlogits[j] * params.head_w.at(i, j);
    d_lnf_out.at(0, i) = acc;
  }

  Mat<T> dx;
  layer_norm_backward(d_lnf_out, fc.lnf_xhat, fc.lnf_rstd, params.lnf_g, dx, grads.lnf_g,
                      grads.lnf_b);

  for (int l = cfg.depth - 1; l >= 0; --l) {
    const auto& c = fc.layers[l];
    const auto& lp = params.layers[l];
    auto& gl = grads.layers[l];

    // MLP branch
    Mat<T> d_mlp_out = dx;
    dropout_backward(d_mlp_out, cfg.dropout, c.drop_mlp);
    acc_colsum(gl.b2, d_mlp_out);
    mm_accumulate_weight(gl.w2, c.mlp_act, d_mlp_out);
    Mat<T> d_act = mm(d_mlp_out, transposed(lp.w2));
    Mat<T> d_pre(d_act.rows, d_act.cols);
    for (size_t i = 0; i < d_act.size(); ++i)
      d_pre.v[i] = d_act.v[i] * gelu_bwd(c.mlp_pre.v[i]);
    acc_colsum(gl.b1, d_pre);
    mm_accumulate_weight(gl.w1, c.ln2_out, d_pre);
    Mat<T> d_ln2_out = mm(d_pre, transposed(lp.w1));

    Mat<T> d_from_ln2;
    layer_norm_backward(d_ln2_out, c.ln2_xhat, c.ln2_rstd, lp.ln2_g, d_from_ln2, gl.ln2_g,
                        gl.ln2_b);

    Mat<T> d_xmid = dx;  // residual path
    add_inplace(d_xmid, d_from_ln2);

    // attention branch
    Mat<T> d_proj = d_xmid;
    dropout_backward(d_proj, cfg.dropout, c.drop_attn);
    acc_colsum(gl.bo, d_proj);
    mm_accumulate_weight(gl.wo, c.attn_out, d_proj);
    Mat<T> d_attn_out = mm(d_proj, transposed(lp.wo));

    Mat<T> dq(n_tok, d), dk(n_tok, d), dv(n_tok, d);
    for (int h = 0; h < cfg.heads; ++h) {
      Mat<T> d_oh = copy_head(d_attn_out, h, dh);
      Mat<T> vh = copy_head(c.v, h, dh);
      Mat<T> qh = copy_head(c.q, h, dh);
      Mat<T> kh = copy_head(c.k, h, dh);
      const Mat<T>& p = c.attn[h];

      Mat<T> dp = mm(d_oh, transposed(vh));  // N x N
      Mat<T> d_vh = mm(transposed(p), d_oh);

      // softmax backward, with the 1/sqrt(dh) scale folded in
      Mat<T> ds(n_tok, n_tok);
      for (int i = 0; i < n_tok; ++i) {
        const T* pr = p.row(i);
        const T* dpr = dp.row(i);
        T dot = T(0);
        for (int j = 0; j < n_tok; ++j) dot += pr[j] * dpr[j];
        T* dsr = ds.row(i);
        for (int j = 0; j < n_tok; ++j) dsr[j] = pr[j] * (dpr[j] - dot) * attn_scale;
      }

      Mat<T> d_qh = mm(ds, kh);
      Mat<T> d_kh = mm(transposed(ds), qh);
      paste_head(dq, d_qh, h, dh);
      paste_head(dk, d_kh, h, dh);
      paste_head(dv, d_vh, h, dh);
    }

    acc_colsum(gl.bq, dq);
    acc_colsum(gl.bk, dk);
    acc_colsum(gl.bv, dv);
    mm_accumulate_weight(gl.wq, c.ln1_out, dq);
    mm_accumulate_weight(gl.wk, c.ln1_out, dk);
    mm_accumulate_weight(gl.wv, c.ln1_out, dv);

    Mat<T> d_ln1_out = mm(dq, transposed(lp.wq));
    mm_acc(dk, transposed(lp.wk), d_ln1_out);
    mm_acc(dv, transposed(lp.wv), d_ln1_out);

    Mat<T> d_from_ln1;
    layer_norm_backward(d_ln1_out, c.ln1_xhat, c.ln1_rstd, lp.ln1_g, d_from_ln1, gl.ln1_g,
                        gl.ln1_b);

    dx = d_xmid;
    add_inplace(dx, d_from_ln1);
  }

  // embedding
  Mat<T> dx0 = dx;
  dropout_backward(dx0, cfg.dropout, fc.drop_embed);
  acc_grad(grads.pos_embed, dx0);
  for (int j = 0; j < d; ++j) grads.cls_token.v[j] += static_cast<double>(dx0.at(0, j));
  // g_E += patches^T @ dx0[1:]
  Mat<T> patches_t = transposed(fc.patches);
  Mat<T> g_e(cfg.patch_dim(), d);
  kernels::matmul<T>(patches_t.data(), dx0.row(1), g_e.data(), cfg.patch_dim(), cfg.n_patches(),
                     d, false);
  acc_grad(grads.patch_proj, g_e);
}

}  // namespace

// --- public forward ----------------------------------------------------------

template <class T>
Mat<T> embed(const ImageBuffer& img, const ViTParams<T>& params, const ViTConfig& cfg) {
  Mat<T> patches = image_to_patch_matrix<T>(img, cfg);
  Mat<T> x0(cfg.tokens(), cfg.embed_dim);
  std::copy(params.cls_token.data(), params.cls_token.data() + cfg.embed_dim, x0.row(0));
  kernels::matmul<T>(patches.data(), params.patch_proj.data(), x0.row(1), cfg.n_patches(),
                     cfg.patch_dim(), cfg.embed_dim, false);
  add_inplace(x0, params.pos_embed);
  return x0;
}
template Mat<float> embed(const ImageBuffer&, const ViTParams<float>&, const ViTConfig&);
template Mat<double> embed(const ImageBuffer&, const ViTParams<double>&, const ViTConfig&);

template <class T>
Mat<T> encoder_layer(const Mat<T>& x, const LayerParams<T>& lp, const ViTConfig& cfg) {
  const int n_tok = x.rows;
  const int d = x.cols;
  const int dh = cfg.head_dim();
  const T attn_scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));

  Mat<T> ln1_out, ln1_xhat;
  std::vector<T> rstd;
  layer_norm(x, lp.ln1_g, lp.ln1_b, ln1_out, ln1_xhat, rstd);
  Mat<T> q = mm(ln1_out, lp.wq);
  add_bias_rows(q, lp.bq);
  Mat<T> k = mm(ln1_out, lp.wk);
  add_bias_rows(k, lp.bk);
  Mat<T> v = mm(ln1_out, lp.wv);
  add_bias_rows(v, lp.bv);
  Mat<T> attn_out(n_tok, d);
  for (int h = 0; h < cfg.heads; ++h) {
    Mat<T> qh = copy_head(q, h, dh);
    Mat<T> kh_t = transposed(copy_head(k, h, dh));
    Mat<T> scores = mm(qh, kh_t);
    for (auto& s : scores.v) s *= attn_scale;
    softmax_rows(scores);
    Mat<T> oh = mm(scores, copy_head(v, h, dh));
    paste_head(attn_out, oh, h, dh);
  }
  Mat<T> proj = mm(attn_out, lp.wo);
  add_bias_rows(proj, lp.bo);
  Mat<T> x_mid = x;
  add_inplace(x_mid, proj);

  Mat<T> ln2_out, ln2_xhat;
  std::vector<T> rstd2;
  layer_norm(x_mid, lp.ln2_g, lp.ln2_b, ln2_out, ln2_xhat, rstd2);
  Mat<T> pre = mm(ln2_out, lp.w1);
  add_bias_rows(pre, lp.b1);
  for (auto& p : pre.v) p = gelu_fwd(p);
  Mat<T> out = mm(pre, lp.w2);
  add_bias_rows(out, lp.b2);
  Mat<T> y = x_mid;
  add_inplace(y, out);
  return y;
}
template Mat<float> encoder_layer(const Mat<float>&, const LayerParams<float>&, const ViTConfig&);
template Mat<double> encoder_layer(const Mat<double>&, const LayerParams<double>&,
                                   const ViTConfig&);

template <class T>
std::vector<T> forward(const ImageBuffer& img, const ViTParams<T>& params, const ViTConfig& cfg) {
  ForwardCache<T> fc;
  forward_impl(img, params, cfg, fc, nullptr);
  return fc.logits;
}
template std::vector<float> forward(const ImageBuffer&, const ViTParams<float>&,
                                    const ViTConfig&);
template std::vector<double> forward(const ImageBuffer&, const ViTParams<double>&,
                                     const ViTConfig&);

// --- loss / gradients ---------------------------------------------------------

namespace {

// cross-entropy pieces in double for stability
template <class T>
double ce_loss_and_dlogits(const std::vector<T>& logits, int label, std::vector<T>& dlogits) {
  const int k = static_cast<int>(logits.size());
  double mx = -1e300;
  for (T v : logits) mx = std::max(mx, static_cast<double>(v));
  double sum = 0;
  for (T v : logits) sum += std::exp(static_cast<double>(v) - mx);
  double lse = mx + std::log(sum);
  dlogits.resize(k);
  for (int j = 0; j < k; ++j) {
    double p = std::exp(static_cast<double>(logits[j]) - mx) / sum;
    dlogits[j] = static_cast<T>(p - (j == label ? 1.0 : 0.0));
  }
  return lse - static_cast<double>(logits[label]);
}

template <class T>
void scale_params(ViTParams<T>& p, T s) {
  p.for_each([&](const char*, Mat<T>& m) {
    for (auto& v : m.v) v *= s;
  });
}

template <class T>
double loss_and_grads_impl(const Batch& batch, const ViTParams<T>& params, const ViTConfig& cfg,
                           ViTParams<double>& grads, rng::Rng* drop_rng, int* correct) {
  if (batch.images.empty()) fail(Errc::validation, "empty batch");
  if (batch.images.size() != batch.labels.size())
    fail(Errc::validation, "batch images/labels size mismatch");
  for (int label : batch.labels)
    if (label < 0 || label >= cfg.n_classes) fail(Errc::validation, "label out of range");

  double loss_sum = 0;
  int correct_count = 0;
  for (size_t i = 0; i < batch.images.size(); ++i) {
    ForwardCache<T> fc;
    forward_impl(*batch.images[i], params, cfg, fc, drop_rng);
    std::vector<T> dlogits;
    loss_sum += ce_loss_and_dlogits(fc.logits, batch.labels[i], dlogits);
    int argmax = 0;
    for (int j = 1; j < cfg.n_classes; ++j)
      if (fc.logits[j] > fc.logits[argmax]) argmax = j;
    if (argmax == batch.labels[i]) ++correct_count;
    backward_impl(params, cfg, fc, dlogits, grads);
  }

  const double inv_b = 1.0 / static_cast<double>(batch.images.size());
  scale_params(grads, inv_b);
  if (correct) *correct = correct_count;
  return loss_sum * inv_b;
}

}  // namespace

template <class T>
double loss_and_grads(const Batch& batch, const ViTParams<T>& params, const ViTConfig& cfg,
                      ViTParams<double>& grads) {
  return loss_and_grads_impl(batch, params, cfg, grads, nullptr, nullptr);
}
template double loss_and_grads(const Batch&, const ViTParams<float>&, const ViTConfig&,
                               ViTParams<double>&);
template double loss_and_grads(const Batch&, const ViTParams<double>&, const ViTConfig&,
                               ViTParams<double>&);

// --- training -------------------------------------------------------------

nlohmann::json Hyper::to_json() const {
  return nlohmann::json{{"epochs", epochs}, {"batch_size", batch_size}, {"lr", lr},
                        {"beta1", beta1},   {"beta2", beta2},           {"eps", eps},
                        {"seed", seed}};
}

Hyper Hyper::from_json(const nlohmann::json& j) {
  Hyper h;
  h.epochs = j.value("epochs", 30);
  h.batch_size = j.value("batch_size", 16);
  h.lr = j.value("lr", 3e-4);
  h.beta1 = j.value("beta1", 0.9);
  h.beta2 = j.value("beta2", 0.999);
  h.eps = j.value("eps", 1e-8);
  h.seed = j.value("seed", uint64_t{0});
  if (h.epochs < 1 || h.batch_size < 1 || h.lr < 0)
    fail(Errc::config, "invalid training hyperparameters");
  return h;
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json je = nlohmann::json::array();
  for (const auto& e : epochs)
    je.push_back({{"epoch", e.epoch},
                  {"train_loss", e.train_loss},
                  {"train_acc", e.train_acc},
                  {"val_loss", e.val_loss},
                  {"val_acc", e.val_acc}});
  return nlohmann::json{{"epochs", je},
                        {"wall_seconds", wall_seconds},
                        {"seed", seed},
                        {"config_hash", config_hash},
                        {"backend", backend},
                        {"best_epoch", best_epoch},
                        {"best_val_acc", best_val_acc},
                        {"deterministic", deterministic}};
}

namespace {

struct AdamState {
  ViTParams<double> m, v;
  int64_t t = 0;
};

void adam_step(ViTParams<float>& params, const ViTParams<double>& grads, AdamState& st,
               const Hyper& hp) {
  ++st.t;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.t));

  // walk the three structures in lockstep via the fixed visit order
  std::vector<Mat<float>*> ps;
  std::vector<const Mat<double>*> gs;
  std::vector<Mat<double>*> ms, vs;
  params.for_each([&](const char*, Mat<float>& m) { ps.push_back(&m); });
  const_cast<ViTParams<double>&>(grads).for_each(
      [&](const char*, Mat<double>& m) { gs.push_back(&m); });
  st.m.for_each([&](const char*, Mat<double>& m) { ms.push_back(&m); });
  st.v.for_each([&](const char*, Mat<double>& m) { vs.push_back(&m); });

  for (size_t k = 0; k < ps.size(); ++k) {
    auto& p = *ps[k];
    const auto& g = *gs[k];
    auto& m = *ms[k];
    auto& v = *vs[k];
    for (size_t i = 0; i < p.size(); ++i) {
      double gi = g.v[i];
      m.v[i] = hp.beta1 * m.v[i] + (1.0 - hp.beta1) * gi;
      v.v[i] = hp.beta2 * v.v[i] + (1.0 - hp.beta2) * gi * gi;
      double mhat = m.v[i] / bc1;
      double vhat = v.v[i] / bc2;
      p.v[i] = static_cast<float>(static_cast<double>(p.v[i]) -
                                  hp.lr * mhat / (std::sqrt(vhat) + hp.eps));
    }
  }
}

void zero_grads(ViTParams<double>& g) {
  g.for_each([](const char*, Mat<double>& m) { std::fill(m.v.begin(), m.v.end(), 0.0); });
}

}  // namespace

EvalResult evaluate(const ViTParams<float>& params, const ViTConfig& cfg,
                    const std::vector<ImageBuffer>& images, const std::vector<int>& labels) {
  if (images.empty()) fail(Errc::validation, "evaluate: empty split");
  if (images.size() != labels.size()) fail(Errc::validation, "evaluate: size mismatch");
  EvalResult res;
  res.confusion.assign(cfg.n_classes, std::vector<int>(cfg.n_classes, 0));
  double loss_sum = 0;
  int correct = 0;
  for (size_t i = 0; i < images.size(); ++i) {
    auto logits = forward<float>(images[i], params, cfg);
    std::vector<float> dl;
    loss_sum += ce_loss_and_dlogits(logits, labels[i], dl);
    int argmax = 0;
    for (int j = 1; j < cfg.n_classes; ++j)
      if (logits[j] > logits[argmax]) argmax = j;
    res.confusion[labels[i]][argmax] += 1;
    if (argmax == labels[i]) ++correct;
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(images.size());
  res.mean_loss = loss_sum / static_cast<double>(images.size());
  return res;
}

TrainedModel train(const std::vector<ImageBuffer>& train_images,
                   const std::vector<int>& train_labels,
                   const std::vector<ImageBuffer>& val_images,
                   const std::vector<int>& val_labels, const ViTConfig& cfg, const Hyper& hyper) {
  cfg.validate();
  if (train_images.empty()) fail(Errc::validation, "train: empty training set");
  if (train_images.size() != train_labels.size()) fail(Errc::validation, "train: size mismatch");

  auto t_start = std::chrono::steady_clock::now();

  TrainedModel out;
  out.final_params = init_params<float>(cfg, sub_seed(hyper.seed, "weight-init"));
  out.best_params = out.final_params;

  rng::Rng order_rng(sub_seed(hyper.seed, "batch-order"), "batch-order");
  rng::Rng drop_rng(sub_seed(hyper.seed, "dropout"), "dropout");

  AdamState adam;
  adam.m = make_grads(out.final_params);
  adam.v = make_grads(out.final_params);
  ViTParams<double> grads = make_grads(out.final_params);

  const size_t n = train_images.size();
  std::vector<uint32_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<uint32_t>(i);

  out.report.seed = hyper.seed;
  out.report.config_hash = cfg.hash();
  out.report.backend = kernels::active_backend_name();
  out.report.best_val_acc = -1.0;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    order_rng.shuffle(idx);
    double loss_sum = 0;
    int correct_sum = 0;
    size_t seen = 0;
    for (size_t start = 0; start < n; start += hyper.batch_size) {
      size_t end = std::min(n, start + hyper.batch_size);
      Batch batch;
      for (size_t i = start; i < end; ++i) {
        batch.images.push_back(&train_images[idx[i]]);
        batch.labels.push_back(train_labels[idx[i]]);
      }
      zero_grads(grads);
      int correct = 0;
      double loss =
          loss_and_grads_impl(batch, out.final_params, cfg, grads,
                              cfg.dropout > 0 ? &drop_rng : nullptr, &correct);
      if (!std::isfinite(loss))
        fail(Errc::numeric, "training diverged (non-finite loss) at epoch " +
                                std::to_string(epoch + 1));
      loss_sum += loss * static_cast<double>(batch.images.size());
      correct_sum += correct;
      seen += batch.images.size();
      adam_step(out.final_params, grads, adam, hyper);
    }

    EpochStats es;
    es.epoch = epoch + 1;
    es.train_loss = loss_sum / static_cast<double>(seen);
    es.train_acc = static_cast<double>(correct_sum) / static_cast<double>(seen);
    if (!val_images.empty()) {
      EvalResult ev = evaluate(out.final_params, cfg, val_images, val_labels);
      es.val_loss = ev.mean_loss;
      es.val_acc = ev.accuracy;
      if (ev.accuracy > out.report.best_val_acc) {
        out.report.best_val_acc = ev.accuracy;
        out.report.best_epoch = epoch + 1;
        out.best_params = out.final_params;
      }
    }
    out.report.epochs.push_back(es);
  }

  if (val_images.empty()) {
    out.best_params = out.final_params;
    out.report.best_val_acc = 0;
  }
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

// --- checkpoints -------------------------------------------------------------

void save_checkpoint(const ViTParams<float>& params, const ViTConfig& cfg,
                     const std::string& path) {
  nlohmann::json tensors = nlohmann::json::array();
  size_t total = 0;
  params.for_each([&](const char* name, const Mat<float>& m) {
    tensors.push_back({{"name", name}, {"rows", m.rows}, {"cols", m.cols}, {"offset", total}});
    total += m.size();
  });
  nlohmann::json header{{"version", 1},
                        {"config", cfg.to_json()},
                        {"config_hash", cfg.hash()},
                        {"tensors", tensors}};
  std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io_missing, "cannot write checkpoint: " + path);
  out.write("CVPT", 4);
  auto write_u32 = [&](uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                    static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  write_u32(1);
  write_u32(static_cast<uint32_t>(hs.size()));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  params.for_each([&](const char*, const Mat<float>& m) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(float)));
  });
  if (!out) fail(Errc::io_corrupt, "checkpoint write failed: " + path);
}

std::pair<ViTParams<float>, ViTConfig> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_missing, "checkpoint not found: " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "CVPT", 4) != 0)
    fail(Errc::io_corrupt, "bad checkpoint magic: " + path);
  auto read_u32 = [&]() {
    uint8_t b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) fail(Errc::io_corrupt, "truncated checkpoint: " + path);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  };
  uint32_t version = read_u32();
  if (version != 1) fail(Errc::io_unsupported, "unknown checkpoint version");
  uint32_t hlen = read_u32();
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  if (in.gcount() != static_cast<std::streamsize>(hlen))
    fail(Errc::io_corrupt, "truncated checkpoint header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io_corrupt, std::string("bad checkpoint header: ") + e.what());
  }
  ViTConfig cfg = ViTConfig::from_json(header.at("config"));
  ViTParams<float> params = init_params<float>(cfg, 0);

  size_t expected_offset = 0;
  auto it = header.at("tensors").begin();
  bool ok = true;
  params.for_each([&](const char* name, Mat<float>& m) {
    if (!ok) return;
    if (it == header.at("tensors").end()) {
      ok = false;
      return;
    }
    const auto& t = *it++;
    if (t.at("name").get<std::string>() != name || t.at("rows").get<int>() != m.rows ||
        t.at("cols").get<int>() != m.cols ||
        t.at("offset").get<size_t>() != expected_offset) {
      ok = false;
      return;
    }
    expected_offset += m.size();
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(m.size() * sizeof(float))) ok = false;
  });
  if (!ok) fail(Errc::io_corrupt, "checkpoint tensor table mismatch: " + path);
  return {std::move(params), cfg};
}

}  // namespace cryptovit::vit
