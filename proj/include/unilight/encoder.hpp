#pragma once

// Small encoder: frozen stub backbones, one query-token fusion module per
// modality, and a small MLP predicting degree-3 SH from the joint embedding.
// Forward/backward passes are templated on the scalar so the same code runs in
// float for training and long double for gradient checks.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "unilight/envmap.hpp"
#include "unilight/error.hpp"
#include "unilight/image.hpp"
#include "unilight/sh.hpp"
#include "unilight/tonemap.hpp"

namespace unilight {

enum class Modality : int { envmap = 0, image = 1, irradiance = 2, text = 3 };
constexpr int kModalityCount = 4;
constexpr std::array<Modality, kModalityCount> kModalities{Modality::envmap, Modality::image, Modality::irradiance,
                                                           Modality::text};

inline std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::envmap: return "envmap";
    case Modality::image: return "image";
    case Modality::irradiance: return "irradiance";
    case Modality::text: return "text";
  }
  return "unknown";
}

inline Modality parse_modality(std::string_view name) {
  for (Modality m : kModalities)
    if (modality_name(m) == name) return m;
  throw InvalidArgument("unknown modality: " + std::string(name));
}

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EncoderConfig {
  int tokens = 8;         // T
  int dim = 512;          // D
  int model_dim = 64;     // width inside the fusion module
  int heads = 4;
  int head_hidden = 256;  // SH head hidden width
  int backbone_dim = 64;
  int text_tokens = 32;
  int patch_grid = 16;
  bool residual = true;
  bool head_bias = true;
  bool shared_head = true;

  void validate() const {
    require(tokens >= 1 && dim >= 1 && model_dim >= 1 && heads >= 1, "encoder shapes must be positive");
    require(model_dim % heads == 0, "model_dim must be divisible by heads");
    require(head_hidden >= 1 && backbone_dim >= 1, "encoder widths must be positive");
    require(text_tokens >= 1 && patch_grid >= 1, "backbone token counts must be positive");
  }
};

// ---------------------------------------------------------------------------
// Deterministic hashing for frozen random projections.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) { return splitmix64(seed ^ splitmix64(salt)); }

// Unit-variance uniform value in [-sqrt(3), sqrt(3)).
inline float hashed_unit(std::uint64_t key) {
  const double u = static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
  return static_cast<float>((2.0 * u - 1.0) * 1.7320508075688772);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Stub backbones.

struct FeatureSequence {
  Mat<float> tokens;  // T_backbone x D_backbone
  Modality modality = Modality::image;
  bool empty_input = false;
};

// 16x16 grid of patches, each flattened and pushed through a frozen random
// projection, plus a frozen per-position embedding.
inline FeatureSequence stub_backbone(const Image& payload, Modality modality, std::uint64_t seed,
                                     const EncoderConfig& config = {}) {
  require(modality != Modality::text, "image backbone cannot take a text modality");
  require(payload.width > 0 && payload.height > 0 && payload.channels > 0, "payload dimensions must be positive");
  const int grid = config.patch_grid;
  require(payload.width % grid == 0 && payload.height % grid == 0, "payload dimensions must be multiples of the patch grid");
  const int pw = payload.width / grid;
  const int ph = payload.height / grid;
  const int patch_dim = pw * ph * payload.channels;
  const int out_dim = config.backbone_dim;

  const std::uint64_t base = mix_seed(seed, 0x1000 + static_cast<int>(modality));
  const std::uint64_t proj_key = mix_seed(base, static_cast<std::uint64_t>(patch_dim));
  const float scale = 1.0f / std::sqrt(static_cast<float>(patch_dim));
  Mat<float> projection(patch_dim, out_dim);
  for (int i = 0; i < patch_dim; ++i)
    for (int j = 0; j < out_dim; ++j)
      projection(i, j) = scale * hashed_unit(proj_key + static_cast<std::uint64_t>(i) * out_dim + j);

  Mat<float> patches(grid * grid, patch_dim);
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      int k = 0;
      for (int y = gy * ph; y < (gy + 1) * ph; ++y)
        for (int x = gx * pw; x < (gx + 1) * pw; ++x)
          for (int c = 0; c < payload.channels; ++c) patches(gy * grid + gx, k++) = payload.at(x, y, c);
    }
  }

  FeatureSequence out;
  out.modality = modality;
  out.tokens = patches * projection;
  const std::uint64_t pos_key = mix_seed(base, 0x505);
  for (int t = 0; t < grid * grid; ++t)
    for (int j = 0; j < out_dim; ++j)
      out.tokens(t, j) += 0.5f * hashed_unit(pos_key + static_cast<std::uint64_t>(t) * out_dim + j);
  return out;
}

// Overlapping character trigrams hashed into text_tokens buckets.
inline FeatureSequence stub_backbone(std::string_view text, std::uint64_t seed, const EncoderConfig& config = {}) {
  FeatureSequence out;
  out.modality = Modality::text;
  out.tokens = Mat<float>::Zero(config.text_tokens, config.backbone_dim);
  if (text.empty()) {
    out.empty_input = true;
    return out;
  }
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  const std::uint64_t base = mix_seed(seed, 0x1000 + static_cast<int>(Modality::text));
  const std::size_t n = lowered.size() < 3 ? 1 : lowered.size() - 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string_view gram = std::string_view(lowered).substr(i, 3);
    const std::uint64_t h = mix_seed(base, fnv1a(gram));
    const int slot = static_cast<int>(h % static_cast<std::uint64_t>(config.text_tokens));
    for (int j = 0; j < config.backbone_dim; ++j) out.tokens(slot, j) += hashed_unit(h + 1 + j);
  }
  return out;
}

// 9-channel environment-map input: Reinhard LDR, log encoding, directions.
inline Image envmap_payload(const EquirectMap& map, const TonemapConfig& tone = {}, bool drop_log = false) {
  const LdrImage ldr = reinhard_tonemap(map.image, tone.key, tone.gamma);
  const LogImage log = log_encode(map.image, tone.i_max);
  const DirectionMap dirs = direction_map(map.width(), map.height());
  Image out(map.width(), map.height(), 9);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      auto o = out.pixel(x, y);
      for (int c = 0; c < 3; ++c) {
        o[c] = ldr.image.at(x, y, c);
        o[3 + c] = drop_log ? 0.0f : log.image.at(x, y, c);
        o[6 + c] = dirs.image.at(x, y, c);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameters.

template <class S>
struct FusionParams {
  Mat<S> queries;  // T x Dm
  Mat<S> w_key;    // Db x Dm
  Mat<S> w_value;  // Db x Dm
  Mat<S> w_out;    // Dm x Dm
  Mat<S> ln_gain;  // 1 x Dm
  Mat<S> ln_bias;  // 1 x Dm
  Mat<S> w_proj;   // Dm x D
  Mat<S> b_proj;   // 1 x D

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("queries", self.queries);
    f("w_key", self.w_key);
    f("w_value", self.w_value);
    f("w_out", self.w_out);
    f("ln_gain", self.ln_gain);
    f("ln_bias", self.ln_bias);
    f("w_proj", self.w_proj);
    f("b_proj", self.b_proj);
  }
};

template <class S>
struct ShHeadParams {
  Mat<S> w1;  // (T*D) x H
  Mat<S> b1;  // 1 x H
  Mat<S> w2;  // H x 48
  Mat<S> b2;  // 1 x 48

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("w1", self.w1);
    f("b1", self.b1);
    f("w2", self.w2);
    f("b2", self.b2);
  }
};

template <class S>
struct EncoderParams {
  EncoderConfig config;
  std::array<FusionParams<S>, kModalityCount> fusion;
  std::vector<ShHeadParams<S>> heads;  // one if shared, else one per modality

  const ShHeadParams<S>& head_for(Modality m) const { return heads[config.shared_head ? 0 : static_cast<int>(m)]; }
  ShHeadParams<S>& head_for(Modality m) { return heads[config.shared_head ? 0 : static_cast<int>(m)]; }

  // f(name, tensor) over every trainable tensor in a fixed order.
  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    for (Modality m : kModalities) {
      const std::string prefix = "fusion." + std::string(modality_name(m)) + ".";
      FusionParams<S>::visit(self.fusion[static_cast<int>(m)],
                             [&](const char* name, auto& t) { f(prefix + name, t); });
    }
    for (std::size_t h = 0; h < self.heads.size(); ++h) {
      const std::string prefix = self.heads.size() == 1 ? "sh_head." : "sh_head." + std::to_string(h) + ".";
      ShHeadParams<S>::visit(self.heads[h], [&](const char* name, auto& t) { f(prefix + name, t); });
    }
  }

  template <class T>
  EncoderParams<T> cast() const {
    EncoderParams<T> out;
    out.config = config;
    out.heads.resize(heads.size());
    std::vector<const Mat<S>*> src;
    visit(*this, [&](const std::string&, const Mat<S>& t) { src.push_back(&t); });
    std::size_t i = 0;
    EncoderParams<T>::visit(out, [&](const std::string&, Mat<T>& t) { t = src[i++]->template cast<T>(); });
    return out;
  }

  EncoderParams zeros_like() const {
    EncoderParams out = *this;
    visit(out, [](const std::string&, Mat<S>& t) { t.setZero(); });
    return out;
  }
};

namespace detail {

template <class S>
Mat<S> uniform_matrix(int rows, int cols, double bound, std::mt19937_64& rng) {
  Mat<S> m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = static_cast<S>((2.0 * uniform_unit(rng) - 1.0) * bound);
  return m;
}

}  // namespace detail

template <class S>
EncoderParams<S> init_params(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  EncoderParams<S> p;
  p.config = config;
  const int t = config.tokens, dm = config.model_dim, db = config.backbone_dim, d = config.dim;
  for (Modality m : kModalities) {
    std::mt19937_64 rng(mix_seed(seed, 0x2000 + static_cast<int>(m)));
    auto& f = p.fusion[static_cast<int>(m)];
    const double fan_model = 1.0 / std::sqrt(static_cast<double>(dm));
    const double fan_backbone = 1.0 / std::sqrt(static_cast<double>(db));
    f.queries = detail::uniform_matrix<S>(t, dm, 1.0, rng);  // free tokens: fan_in = 1
    f.w_key = detail::uniform_matrix<S>(db, dm, fan_backbone, rng);
    f.w_value = detail::uniform_matrix<S>(db, dm, fan_backbone, rng);
    f.w_out = detail::uniform_matrix<S>(dm, dm, fan_model, rng);
    f.ln_gain = Mat<S>::Ones(1, dm);
    f.ln_bias = Mat<S>::Zero(1, dm);
    f.w_proj = detail::uniform_matrix<S>(dm, d, fan_model, rng);
    f.b_proj = Mat<S>::Zero(1, d);
  }
  const int head_count = config.shared_head ? 1 : kModalityCount;
  p.heads.resize(head_count);
  for (int h = 0; h < head_count; ++h) {
    std::mt19937_64 rng(mix_seed(seed, 0x3000 + h));
    auto& hp = p.heads[h];
    hp.w1 = detail::uniform_matrix<S>(t * d, config.head_hidden, 1.0 / std::sqrt(static_cast<double>(t * d)), rng);
    hp.b1 = Mat<S>::Zero(1, config.head_hidden);
    hp.w2 = detail::uniform_matrix<S>(config.head_hidden, 3 * kShCount,
                                      1.0 / std::sqrt(static_cast<double>(config.head_hidden)), rng);
    hp.b2 = Mat<S>::Zero(1, 3 * kShCount);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Fusion: learnable queries attend over backbone tokens, residual add, layer
// norm, linear projection to T x D. Batched: n samples with possibly different
// token counts share every projection GEMM; only attention runs per sample.
// Outputs are stacked, sample i owning rows [i*T, (i+1)*T).

constexpr double kLayerNormEpsilon = 1e-5;

template <class S>
struct FusionCache {
  Mat<S> features;                // stacked backbone tokens
  std::vector<Eigen::Index> offsets;  // first feature row of each sample, plus the end
  Mat<S> keys;
  Mat<S> values;
  std::vector<Mat<S>> attention;  // [sample * heads + head], T x N_i
  Mat<S> mixed;                   // concatenated head outputs, nT x Dm
  Mat<S> normalized;              // (R - mean) / std, nT x Dm
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std;
  Mat<S> ln_out;
};

template <class S>
Mat<S> fusion_forward_batch(const FusionParams<S>& p, const EncoderConfig& config, const std::vector<const Mat<S>*>& batch,
                            FusionCache<S>* cache = nullptr) {
  using std::sqrt;
  const int t = static_cast<int>(p.queries.rows());
  const int dm = static_cast<int>(p.queries.cols());
  const int heads = config.heads;
  const int dh = dm / heads;
  const S scale = S(1) / sqrt(static_cast<S>(dh));
  const auto n = static_cast<Eigen::Index>(batch.size());
  require(n >= 1, "fusion_forward: empty batch");

  std::vector<Eigen::Index> offsets{0};
  for (const Mat<S>* f : batch) {
    if (f->cols() != p.w_key.rows() || f->rows() < 1)
      throw InvalidArgument("fusion_forward: feature shape does not match parameters");
    offsets.push_back(offsets.back() + f->rows());
  }
  Mat<S> features(offsets.back(), p.w_key.rows());
  for (Eigen::Index i = 0; i < n; ++i) features.middleRows(offsets[i], batch[i]->rows()) = *batch[i];

  const Mat<S> keys = features * p.w_key;
  const Mat<S> values = features * p.w_value;
  Mat<S> mixed(n * t, dm);
  std::vector<Mat<S>> attention(static_cast<std::size_t>(n * heads));
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::Index rows = offsets[s + 1] - offsets[s];
    for (int h = 0; h < heads; ++h) {
      Mat<S> a = (p.queries.middleCols(h * dh, dh) *
                  keys.block(offsets[s], h * dh, rows, dh).transpose()) * scale;
      for (int i = 0; i < t; ++i) {
        const S peak = a.row(i).maxCoeff();
        a.row(i) = (a.row(i).array() - peak).exp();
        a.row(i) /= a.row(i).sum();
      }
      mixed.block(s * t, h * dh, t, dh).noalias() = a * values.block(offsets[s], h * dh, rows, dh);
      attention[static_cast<std::size_t>(s * heads + h)] = std::move(a);
    }
  }

  Mat<S> residual = mixed * p.w_out;
  if (config.residual)
    for (Eigen::Index s = 0; s < n; ++s) residual.middleRows(s * t, t) += p.queries;

  Mat<S> normalized(n * t, dm);
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(n * t);
  for (Eigen::Index i = 0; i < n * t; ++i) {
    const S mean = residual.row(i).mean();
    const auto centered = (residual.row(i).array() - mean).eval();
    const S var = centered.square().mean();
    inv_std[i] = S(1) / sqrt(var + static_cast<S>(kLayerNormEpsilon));
    normalized.row(i) = centered * inv_std[i];
  }
  Mat<S> ln_out = (normalized.array().rowwise() * p.ln_gain.row(0).array()).rowwise() + p.ln_bias.row(0).array();
  Mat<S> out = ln_out * p.w_proj;
  out.rowwise() += p.b_proj.row(0);

  if (cache) {
    cache->features = std::move(features);
    cache->offsets = std::move(offsets);
    cache->keys = keys;
    cache->values = values;
    cache->attention = std::move(attention);
    cache->mixed = std::move(mixed);
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->ln_out = std::move(ln_out);
  }
  return out;
}

template <class S>
Mat<S> fusion_forward(const FusionParams<S>& p, const EncoderConfig& config, const Mat<S>& features,
                      FusionCache<S>* cache = nullptr) {
  return fusion_forward_batch<S>(p, config, {&features}, cache);
}

// Accumulates parameter gradients into `grads` given dL/d(stacked embeddings).
template <class S>
void fusion_backward(const FusionParams<S>& p, const EncoderConfig& config, const FusionCache<S>& c,
                     const Mat<S>& d_out, FusionParams<S>& grads) {
  using std::sqrt;
  const int t = static_cast<int>(p.queries.rows());
  const int dm = static_cast<int>(p.queries.cols());
  const int heads = config.heads;
  const int dh = dm / heads;
  const S scale = S(1) / sqrt(static_cast<S>(dh));
  const auto n = static_cast<Eigen::Index>(c.offsets.size() - 1);

  grads.w_proj.noalias() += c.ln_out.transpose() * d_out;
  grads.b_proj += d_out.colwise().sum();
  const Mat<S> d_ln = d_out * p.w_proj.transpose();

  grads.ln_gain += (d_ln.array() * c.normalized.array()).colwise().sum().matrix();
  grads.ln_bias += d_ln.colwise().sum();
  const Mat<S> d_norm = d_ln.array().rowwise() * p.ln_gain.row(0).array();

  Mat<S> d_residual(n * t, dm);
  for (Eigen::Index i = 0; i < n * t; ++i) {
    const S mean_d = d_norm.row(i).mean();
    const S mean_dx = (d_norm.row(i).array() * c.normalized.row(i).array()).mean();
    d_residual.row(i) = (d_norm.row(i).array() - mean_d - c.normalized.row(i).array() * mean_dx) * c.inv_std[i];
  }

  if (config.residual)
    for (Eigen::Index s = 0; s < n; ++s) grads.queries += d_residual.middleRows(s * t, t);
  grads.w_out.noalias() += c.mixed.transpose() * d_residual;
  const Mat<S> d_mixed = d_residual * p.w_out.transpose();

  Mat<S> d_keys(c.keys.rows(), dm);
  Mat<S> d_values(c.values.rows(), dm);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::Index rows = c.offsets[s + 1] - c.offsets[s];
    for (int h = 0; h < heads; ++h) {
      const Mat<S>& a = c.attention[static_cast<std::size_t>(s * heads + h)];
      const auto d_head = d_mixed.block(s * t, h * dh, t, dh);
      d_values.block(c.offsets[s], h * dh, rows, dh).noalias() = a.transpose() * d_head;
      const Mat<S> d_a = d_head * c.values.block(c.offsets[s], h * dh, rows, dh).transpose();
      const Eigen::Matrix<S, Eigen::Dynamic, 1> row_dot = (d_a.array() * a.array()).rowwise().sum();
      const Mat<S> d_logits = (a.array() * (d_a.array().colwise() - row_dot.array())).matrix() * scale;
      grads.queries.middleCols(h * dh, dh).noalias() += d_logits * c.keys.block(c.offsets[s], h * dh, rows, dh);
      d_keys.block(c.offsets[s], h * dh, rows, dh).noalias() = d_logits.transpose() * p.queries.middleCols(h * dh, dh);
    }
  }
  grads.w_key.noalias() += c.features.transpose() * d_keys;
  grads.w_value.noalias() += c.features.transpose() * d_values;
}

template <class S>
struct HeadCache {
  Mat<S> input;   // n x (T*D)
  Mat<S> hidden;  // n x H, after tanh
};

// Embeddings are stacked (n*T x D); output is n x 48, channel-major
// (channel * 16 + index) per row.
template <class S>
Mat<S> head_forward(const ShHeadParams<S>& p, const EncoderConfig& config, const Mat<S>& embeddings,
                    HeadCache<S>* cache = nullptr) {
  const Eigen::Index width = p.w1.rows();
  if (embeddings.size() == 0 || embeddings.size() % width != 0)
    throw InvalidArgument("predict_sh: embedding shape does not match head");
  const Eigen::Index n = embeddings.size() / width;
  const Mat<S> input = Eigen::Map<const Mat<S>>(embeddings.data(), n, width);
  Mat<S> hidden = input * p.w1;
  if (config.head_bias) hidden.rowwise() += p.b1.row(0);
  hidden = hidden.array().tanh();
  Mat<S> out = hidden * p.w2;
  if (config.head_bias) out.rowwise() += p.b2.row(0);
  if (cache) {
    cache->input = input;
    cache->hidden = std::move(hidden);
  }
  return out;
}

// Accumulates head gradients; returns dL/d(embeddings) in the stacked layout.
template <class S>
Mat<S> head_backward(const ShHeadParams<S>& p, const EncoderConfig& config, const HeadCache<S>& c,
                     const Mat<S>& d_out, ShHeadParams<S>& grads, Eigen::Index rows, Eigen::Index cols) {
  grads.w2.noalias() += c.hidden.transpose() * d_out;
  const Mat<S> d_hidden = ((d_out * p.w2.transpose()).array() * (S(1) - c.hidden.array().square())).matrix();
  grads.w1.noalias() += c.input.transpose() * d_hidden;
  if (config.head_bias) {
    grads.b2 += d_out.colwise().sum();
    grads.b1 += d_hidden.colwise().sum();
  }
  const Mat<S> d_input = d_hidden * p.w1.transpose();
  return Eigen::Map<const Mat<S>>(d_input.data(), rows, cols);
}

// ---------------------------------------------------------------------------
// Inference-facing API.

struct Embedding {
  Mat<float> tokens;  // T x D
  Modality modality = Modality::image;
  std::string id;
};

inline Embedding fusion_forward(const FusionParams<float>& params, const EncoderConfig& config,
                                const FeatureSequence& features, std::string id = {}) {
  return {fusion_forward<float>(params, config, features.tokens), features.modality, std::move(id)};
}

inline Embedding encode(const EncoderParams<float>& params, const FeatureSequence& features, std::string id = {}) {
  return fusion_forward(params.fusion[static_cast<int>(features.modality)], params.config, features, std::move(id));
}

inline ShCoefficients coefficients_from_row(const float* row) {
  ShCoefficients out;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < kShCount; ++i) out(c, i) = row[c * kShCount + i];
  return out;
}

inline ShCoefficients predict_sh(const ShHeadParams<float>& params, const EncoderConfig& config,
                                 const Embedding& embedding) {
  const Mat<float> out = head_forward<float>(params, config, embedding.tokens);
  return coefficients_from_row(out.data());
}

}  // namespace unilight
