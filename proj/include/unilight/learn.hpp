#pragma once

// Contrastive + SH objective, analytic gradients, Adam training loop and a
// central-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "unilight/encoder.hpp"
#include "unilight/error.hpp"
#include "unilight/sh.hpp"

namespace unilight {

enum class Pooling { flatten, mean };

struct LearnConfig {
  double temperature = 0.07;
  bool learn_temperature = false;
  double learning_rate = 3e-3;
  int batch_size = 32;
  int steps = 500;
  std::uint64_t seed = 0;
  double sh_loss_weight = 1.0;
  int sh_degree = 3;               // coefficients supervised: (degree + 1)^2 per channel
  bool sh_all_modalities = true;   // false: only the envmap embedding feeds the SH head
  double log_dropout = 0.5;        // probability of zeroing the envmap log block per sample
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Pooling pooling = Pooling::flatten;
  bool cosine_decay = true;        // learning rate follows a half cosine to zero over `steps`

  void validate() const {
    require(temperature > 0.0, "temperature must be positive");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(steps >= 0, "steps must be >= 0");
    require(learning_rate >= 0.0, "learning_rate must be >= 0");
    require(sh_degree >= 0 && sh_degree <= kShDegree, "sh_degree must be in [0, 3]");
    require(log_dropout >= 0.0 && log_dropout <= 1.0, "log_dropout must be in [0, 1]");
  }
};

template <class S>
struct ModelParams {
  EncoderParams<S> encoder;
  Mat<S> log_temperature = Mat<S>::Zero(1, 1);

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    EncoderParams<S>::visit(self.encoder, f);
    f(std::string("log_temperature"), self.log_temperature);
  }

  ModelParams zeros_like() const {
    ModelParams out{encoder.zeros_like(), Mat<S>::Zero(1, 1)};
    return out;
  }

  template <class T>
  ModelParams<T> cast() const {
    return {encoder.template cast<T>(), log_temperature.template cast<T>()};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit(*this, [&](const std::string&, const Mat<S>& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }
};

template <class S>
ModelParams<S> init_model(const EncoderConfig& encoder, const LearnConfig& learn, std::uint64_t seed) {
  ModelParams<S> p{init_params<S>(encoder, seed), Mat<S>::Constant(1, 1, static_cast<S>(std::log(learn.temperature)))};
  return p;
}

// Flatten / scatter helpers over the visit order.
template <class S, class P>
std::vector<S> flatten_params(const P& params) {
  std::vector<S> out;
  P::visit(params, [&](const std::string&, const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) out.push_back(t.data()[i]);
  });
  return out;
}

template <class S, class P>
void scatter_params(P& params, std::span<const S> values) {
  std::size_t k = 0;
  P::visit(params, [&](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = values[k++];
  });
}

// ---------------------------------------------------------------------------
// Losses.

template <class S>
struct ContrastiveResult {
  S loss = S(0);
  std::vector<std::vector<Mat<S>>> grads;  // [modality][sample], shaped like the inputs
  S d_log_temperature = S(0);              // dL/d ln(temperature)
};

namespace detail {

template <class S>
Mat<S> pool(const Mat<S>& e, Pooling pooling) {
  if (pooling == Pooling::mean) return e.colwise().mean();
  return Eigen::Map<const Mat<S>>(e.data(), 1, e.size());
}

template <class S>
Mat<S> unpool(const Mat<S>& d, Pooling pooling, Eigen::Index rows, Eigen::Index cols) {
  if (pooling == Pooling::mean) return (d / static_cast<S>(rows)).replicate(rows, 1);
  return Eigen::Map<const Mat<S>>(d.data(), rows, cols);
}

}  // namespace detail

// Mean over ordered modality pairs (a != b) and rows of the softmax
// cross-entropy on cosine similarities / temperature, target = same index.
template <class S>
ContrastiveResult<S> contrastive_loss(const std::vector<std::vector<Mat<S>>>& embeddings, S temperature,
                                      Pooling pooling = Pooling::flatten) {
  using std::exp;
  using std::log;
  using std::sqrt;
  const int m = static_cast<int>(embeddings.size());
  require(m >= 1, "contrastive_loss needs at least one modality");
  const int n = static_cast<int>(embeddings[0].size());
  if (n == 0) throw InvalidArgument("contrastive_loss needs N >= 1");
  for (const auto& list : embeddings)
    if (static_cast<int>(list.size()) != n) throw InvalidArgument("contrastive_loss: modality lists differ in length");

  std::vector<Mat<S>> unit(m);
  std::vector<std::vector<S>> norms(m, std::vector<S>(n));
  for (int a = 0; a < m; ++a) {
    const Eigen::Index width = detail::pool(embeddings[a][0], pooling).cols();
    unit[a].resize(n, width);
    for (int i = 0; i < n; ++i) {
      const Mat<S> v = detail::pool(embeddings[a][i], pooling);
      if (v.cols() != width) throw InvalidArgument("contrastive_loss: embedding shapes differ");
      const S norm = sqrt(v.squaredNorm());
      if (!(norm > S(0))) throw InvalidArgument("contrastive_loss: zero-norm embedding");
      norms[a][i] = norm;
      unit[a].row(i) = v / norm;
    }
  }

  ContrastiveResult<S> result;
  std::vector<Mat<S>> d_unit(m);
  for (int a = 0; a < m; ++a) d_unit[a] = Mat<S>::Zero(n, unit[a].cols());
  const int pairs = m * (m - 1);
  if (pairs > 0) {
    const S weight = S(1) / static_cast<S>(pairs * n);
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < m; ++b) {
        if (a == b) continue;
        const Mat<S> cosine = unit[a] * unit[b].transpose();
        const Mat<S> logits = cosine / temperature;
        Mat<S> d_logits(n, n);
        for (int i = 0; i < n; ++i) {
          const S peak = logits.row(i).maxCoeff();
          const auto shifted = (logits.row(i).array() - peak).exp().eval();
          const S total = shifted.sum();
          result.loss += (log(total) + peak - logits(i, i)) * weight;
          d_logits.row(i) = shifted / total;
          d_logits(i, i) -= S(1);
        }
        d_logits *= weight;
        // logits = cosine / tau, tau = exp(s): dL/ds = -sum(dL/dlogits * logits)
        result.d_log_temperature -= (d_logits.array() * logits.array()).sum();
        const Mat<S> d_cosine = d_logits / temperature;
        d_unit[a].noalias() += d_cosine * unit[b];
        d_unit[b].noalias() += d_cosine.transpose() * unit[a];
      }
    }
  }

  result.grads.resize(m);
  for (int a = 0; a < m; ++a) {
    result.grads[a].reserve(n);
    for (int i = 0; i < n; ++i) {
      const auto u = unit[a].row(i);
      const auto du = d_unit[a].row(i);
      const Mat<S> d_pooled = (du - u * u.dot(du)) / norms[a][i];
      const Mat<S>& e = embeddings[a][i];
      result.grads[a].push_back(detail::unpool<S>(d_pooled, pooling, e.rows(), e.cols()));
    }
  }
  return result;
}

template <class S>
struct ShLossResult {
  S loss = S(0);
  Mat<S> grad;  // 1 x 48
};

// Mean squared error over the supervised coefficients (all 48 at degree 3).
template <class S>
ShLossResult<S> sh_loss(const Mat<S>& pred, const Mat<S>& gt, int degree = kShDegree) {
  if (pred.size() != 3 * kShCount || gt.size() != 3 * kShCount) throw InvalidArgument("sh_loss: expected 48 values");
  const int per_channel = (degree + 1) * (degree + 1);
  const S count = static_cast<S>(3 * per_channel);
  ShLossResult<S> r{S(0), Mat<S>::Zero(1, 3 * kShCount)};
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < per_channel; ++i) {
      const int k = c * kShCount + i;
      const S diff = pred.data()[k] - gt.data()[k];
      r.loss += diff * diff / count;
      r.grad(0, k) = S(2) * diff / count;
    }
  }
  return r;
}

template <class S>
Mat<S> sh_row(const ShCoefficients& c) {
  Mat<S> row(1, 3 * kShCount);
  for (int ch = 0; ch < 3; ++ch)
    for (int i = 0; i < kShCount; ++i) row(0, ch * kShCount + i) = static_cast<S>(c(ch, i));
  return row;
}

inline ShLossResult<double> sh_loss(const ShCoefficients& pred, const ShCoefficients& gt, int degree = kShDegree) {
  return sh_loss<double>(sh_row<double>(pred), sh_row<double>(gt), degree);
}

// ---------------------------------------------------------------------------
// Samples and the combined objective.

struct TrainingSample {
  std::string id;
  int group = 0;  // samples sharing a group (e.g. crops of one panorama) never share a batch
  std::array<FeatureSequence, kModalityCount> features;
  std::optional<FeatureSequence> envmap_without_log;  // features with the log block dropped
  ShCoefficients sh;
};

template <class S>
struct LossResult {
  S contrastive = S(0);
  S sh = S(0);
  S total = S(0);
  ModelParams<S> grads;
};

// `drop_log[i]` selects the log-dropped envmap features for sample i.
template <class S>
LossResult<S> total_loss(std::span<const TrainingSample* const> batch, const ModelParams<S>& params,
                         const LearnConfig& config, const std::vector<bool>& drop_log = {}) {
  using std::exp;
  const int n = static_cast<int>(batch.size());
  require(n >= 1, "total_loss needs a non-empty batch");
  const EncoderConfig& ec = params.encoder.config;

  const Eigen::Index t = ec.tokens;
  std::vector<Mat<S>> stacked(kModalityCount);
  std::vector<std::vector<Mat<S>>> embeddings(kModalityCount, std::vector<Mat<S>>(n));
  std::vector<FusionCache<S>> caches(kModalityCount);
  for (int m = 0; m < kModalityCount; ++m) {
    std::vector<Mat<S>> inputs(n);
    std::vector<const Mat<S>*> views(n);
    for (int i = 0; i < n; ++i) {
      const TrainingSample& s = *batch[i];
      const bool dropped = m == 0 && !drop_log.empty() && drop_log[i] && s.envmap_without_log.has_value();
      const FeatureSequence& f = dropped ? *s.envmap_without_log : s.features[m];
      inputs[i] = f.tokens.template cast<S>();
      views[i] = &inputs[i];
    }
    stacked[m] = fusion_forward_batch<S>(params.encoder.fusion[m], ec, views, &caches[m]);
    for (int i = 0; i < n; ++i) embeddings[m][i] = stacked[m].middleRows(i * t, t);
  }

  LossResult<S> result;
  result.grads = params.zeros_like();
  const S temperature = exp(params.log_temperature(0, 0));
  ContrastiveResult<S> contrastive = contrastive_loss<S>(embeddings, temperature, config.pooling);
  result.contrastive = contrastive.loss;
  if (config.learn_temperature) result.grads.log_temperature(0, 0) = contrastive.d_log_temperature;

  std::vector<std::vector<Mat<S>>>& d_embeddings = contrastive.grads;
  const S sh_weight = static_cast<S>(config.sh_loss_weight);
  if (config.sh_loss_weight != 0.0) {
    const int supervised = config.sh_all_modalities ? kModalityCount : 1;
    const S share = S(1) / static_cast<S>(supervised * n);
    for (int m = 0; m < supervised; ++m) {
      const Modality modality = kModalities[m];
      const ShHeadParams<S>& head = params.encoder.head_for(modality);
      ShHeadParams<S>& head_grads = result.grads.encoder.head_for(modality);
      HeadCache<S> hc;
      const Mat<S> pred = head_forward<S>(head, ec, stacked[m], &hc);
      Mat<S> d_pred(n, 3 * kShCount);
      for (int i = 0; i < n; ++i) {
        const ShLossResult<S> l = sh_loss<S>(pred.row(i), sh_row<S>(batch[i]->sh), config.sh_degree);
        result.sh += l.loss * share;
        d_pred.row(i) = l.grad * (share * sh_weight);
      }
      const Mat<S> d_stacked = head_backward<S>(head, ec, hc, d_pred, head_grads, stacked[m].rows(), stacked[m].cols());
      for (int i = 0; i < n; ++i) d_embeddings[m][i] += d_stacked.middleRows(i * t, t);
    }
  }
  result.total = result.contrastive + sh_weight * result.sh;

  for (int m = 0; m < kModalityCount; ++m) {
    Mat<S> d_out(n * t, ec.dim);
    for (int i = 0; i < n; ++i) d_out.middleRows(i * t, t) = d_embeddings[m][i];
    fusion_backward<S>(params.encoder.fusion[m], ec, caches[m], d_out, result.grads.encoder.fusion[m]);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Gradient checking.

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = true;
};

// Central differences; relative error |a - n| / max(1e-8, |a| + |n|).
template <class S>
GradCheckReport grad_check(const std::function<S(std::span<const S>)>& f, std::span<const S> analytic,
                           std::vector<S> x, double tolerance, S step = S(1e-4),
                           std::span<const std::size_t> indices = {}) {
  GradCheckReport report;
  auto check = [&](std::size_t i) {
    const S saved = x[i];
    x[i] = saved + step;
    const S up = f(x);
    x[i] = saved - step;
    const S down = f(x);
    x[i] = saved;
    const S numeric = (up - down) / (S(2) * step);
    const double a = static_cast<double>(analytic[i]);
    const double num = static_cast<double>(numeric);
    const double rel = std::abs(a - num) / std::max(1e-8, std::abs(a) + std::abs(num));
    if (report.checked == 0 || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = i;
    }
    ++report.checked;
  };
  if (indices.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) check(i);
  } else {
    for (std::size_t i : indices) check(i);
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

// ---------------------------------------------------------------------------
// Training.

struct LossRecord {
  int step = 0;
  double contrastive = 0.0;
  double sh = 0.0;
  double total = 0.0;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<LossRecord> log;
};

// Shuffles once per epoch, then fills batches in order while skipping samples
// whose group is already present in the current batch. When nothing left in
// the epoch fits, a new epoch starts early.
class GroupBatchSampler {
 public:
  GroupBatchSampler(std::span<const TrainingSample> samples, int batch_size, std::uint64_t seed)
      : samples_(samples), rng_(seed) {
    std::vector<int> groups;
    for (const auto& s : samples) groups.push_back(s.group);
    std::sort(groups.begin(), groups.end());
    const auto distinct = std::unique(groups.begin(), groups.end()) - groups.begin();
    batch_size_ = std::min<int>(batch_size, static_cast<int>(distinct));
  }

  std::vector<const TrainingSample*> next() {
    std::vector<const TrainingSample*> batch;
    std::vector<int> groups;
    while (static_cast<int>(batch.size()) < batch_size_) {
      if (pending_.empty()) refill();
      auto it = std::find_if(pending_.begin(), pending_.end(), [&](int i) {
        return std::find(groups.begin(), groups.end(), samples_[i].group) == groups.end();
      });
      if (it == pending_.end()) {
        refill();
        continue;
      }
      batch.push_back(&samples_[*it]);
      groups.push_back(samples_[*it].group);
      pending_.erase(it);
    }
    return batch;
  }

 private:
  void refill() {
    pending_.resize(samples_.size());
    std::iota(pending_.begin(), pending_.end(), 0);
    std::shuffle(pending_.begin(), pending_.end(), rng_);
  }

  std::span<const TrainingSample> samples_;
  int batch_size_ = 1;
  std::mt19937_64 rng_;
  std::vector<int> pending_;
};

struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
  int t = 0;
};

template <class P>
void adam_step(P& params, const P& grads, AdamState& state, const LearnConfig& config, bool update_temperature,
               double lr_scale = 1.0) {
  std::vector<Mat<float>*> ps;
  std::vector<const Mat<float>*> gs;
  std::vector<bool> frozen;
  P::visit(params, [&](const std::string& name, Mat<float>& t) {
    ps.push_back(&t);
    frozen.push_back(name == "log_temperature" && !update_temperature);
  });
  P::visit(grads, [&](const std::string&, const Mat<float>& t) { gs.push_back(&t); });
  std::size_t total = 0;
  for (auto* p : ps) total += static_cast<std::size_t>(p->size());
  if (state.m.empty()) {
    state.m.assign(total, 0.0f);
    state.v.assign(total, 0.0f);
  }
  ++state.t;
  const double b1 = config.beta1, b2 = config.beta2;
  const float lr_t = static_cast<float>(lr_scale * config.learning_rate * std::sqrt(1.0 - std::pow(b2, state.t)) /
                                        (1.0 - std::pow(b1, state.t)));
  const float eps_t = static_cast<float>(config.epsilon * std::sqrt(1.0 - std::pow(b2, state.t)));
  const float fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    float* w = ps[k]->data();
    const float* g = gs[k]->data();
    const auto size = static_cast<std::size_t>(ps[k]->size());
    if (!frozen[k] && lr_t != 0.0f) {
      for (std::size_t i = 0; i < size; ++i) {
        float& m = state.m[offset + i];
        float& v = state.v[offset + i];
        m = fb1 * m + (1.0f - fb1) * g[i];
        v = fb2 * v + (1.0f - fb2) * g[i] * g[i];
        w[i] -= lr_t * m / (std::sqrt(v) + eps_t);
      }
    }
    offset += size;
  }
}

// Deterministic Adam training. `initial` defaults to init_model(encoder, config, seed).
inline TrainResult train(std::span<const TrainingSample> dataset, const EncoderConfig& encoder,
                         const LearnConfig& config, std::optional<ModelParams<float>> initial = std::nullopt,
                         const std::function<void(const LossRecord&)>& on_step = {}) {
  if (dataset.empty()) throw InvalidArgument("train: empty dataset");
  config.validate();
  TrainResult result;
  result.params = initial ? std::move(*initial) : init_model<float>(encoder, config, config.seed);
  GroupBatchSampler sampler(dataset, config.batch_size, mix_seed(config.seed, 0x5a4d));
  std::mt19937_64 dropout_rng(mix_seed(config.seed, 0xd809));
  AdamState adam;
  result.log.reserve(static_cast<std::size_t>(config.steps));
  for (int step = 0; step < config.steps; ++step) {
    const auto batch = sampler.next();
    std::vector<bool> drop(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) drop[i] = uniform_unit(dropout_rng) < config.log_dropout;
    const LossResult<float> loss = total_loss<float>(batch, result.params, config, drop);
    const double scale =
        config.cosine_decay ? 0.5 * (1.0 + std::cos(kPi * step / static_cast<double>(config.steps))) : 1.0;
    adam_step(result.params, loss.grads, adam, config, config.learn_temperature, scale);
    LossRecord rec{step, loss.contrastive, loss.sh, loss.total};
    result.log.push_back(rec);
    if (on_step) on_step(rec);
  }
  return result;
}

// Embeds every modality of every sample with a trained model.
inline std::vector<std::vector<Embedding>> embed_samples(const EncoderParams<float>& params,
                                                         std::span<const TrainingSample> samples) {
  std::vector<std::vector<Embedding>> out(kModalityCount);
  for (int m = 0; m < kModalityCount; ++m) {
    out[m].reserve(samples.size());
    for (const TrainingSample& s : samples) out[m].push_back(encode(params, s.features[m], s.id));
  }
  return out;
}

}  // namespace unilight
