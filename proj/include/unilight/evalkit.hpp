#pragma once

// Cross-modal retrieval statistics, the yaw-rotation similarity sweep and
// full-reference metrics for rendered LDR images.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "unilight/encoder.hpp"
#include "unilight/envmap.hpp"
#include "unilight/error.hpp"
#include "unilight/image.hpp"

namespace unilight {

struct SimilarityMatrix {
  Eigen::MatrixXd values;  // rows = queries, cols = gallery
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
};

inline std::vector<double> flatten_normalized(const Mat<float>& tokens) {
  std::vector<double> v(tokens.data(), tokens.data() + tokens.size());
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (!(n > 0.0)) throw InvalidArgument("cannot normalize a zero embedding");
  for (double& x : v) x /= n;
  return v;
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw InvalidArgument("cosine_similarity: zero vector");
  return dot / std::sqrt(na * nb);
}

inline SimilarityMatrix similarity_matrix(const std::vector<Embedding>& queries, const std::vector<Embedding>& gallery) {
  auto stack = [](const std::vector<Embedding>& list, std::vector<std::string>& ids) {
    require(!list.empty(), "similarity_matrix: empty embedding list");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(list.size()), list[0].tokens.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].tokens.size() != m.cols()) throw InvalidArgument("similarity_matrix: embedding shapes differ");
      const auto v = flatten_normalized(list[i].tokens);
      m.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      ids.push_back(list[i].id);
    }
    return m;
  };
  SimilarityMatrix s;
  const Eigen::MatrixXd q = stack(queries, s.row_ids);
  const Eigen::MatrixXd g = stack(gallery, s.col_ids);
  s.values = q * g.transpose();
  return s;
}

struct RetrievalStats {
  std::vector<int> ks;
  std::vector<double> recall;  // percent, aligned with ks
  double mrr = 0.0;
  double median_rank = 0.0;
  double mean_rank = 0.0;
  std::vector<int> ranks;

  double recall_at(int k) const {
    for (std::size_t i = 0; i < ks.size(); ++i)
      if (ks[i] == k) return recall[i];
    throw InvalidArgument("recall_at: K not evaluated");
  }
};

inline double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// rank = 1 + #(strictly more similar) + #(equally similar and earlier in the gallery).
inline RetrievalStats retrieval_metrics(const SimilarityMatrix& sim, std::span<const int> ground_truth,
                                        std::vector<int> ks = {1, 5, 10}) {
  const auto rows = sim.values.rows();
  const auto cols = sim.values.cols();
  if (static_cast<Eigen::Index>(ground_truth.size()) != rows)
    throw InvalidArgument("retrieval_metrics: one ground-truth index per query required");
  RetrievalStats out;
  out.ks = std::move(ks);
  out.ranks.reserve(static_cast<std::size_t>(rows));
  for (Eigen::Index q = 0; q < rows; ++q) {
    const int gt = ground_truth[static_cast<std::size_t>(q)];
    if (gt < 0 || gt >= cols) throw InvalidArgument("retrieval_metrics: missing ground-truth id");
    const double target = sim.values(q, gt);
    int rank = 1;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double s = sim.values(q, j);
      if (s > target || (s == target && j < gt)) ++rank;
    }
    out.ranks.push_back(rank);
  }
  std::vector<double> as_double(out.ranks.begin(), out.ranks.end());
  for (int k : out.ks) {
    const auto hits = std::count_if(out.ranks.begin(), out.ranks.end(), [k](int r) { return r <= k; });
    out.recall.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(rows));
  }
  double reciprocal = 0.0;
  for (int r : out.ranks) reciprocal += 1.0 / r;
  out.mrr = reciprocal / static_cast<double>(rows);
  out.mean_rank = std::accumulate(as_double.begin(), as_double.end(), 0.0) / static_cast<double>(rows);
  out.median_rank = median(as_double);
  return out;
}

// Ground truth by id: query i matches the gallery item with the same id.
inline std::vector<int> ground_truth_by_id(const SimilarityMatrix& sim) {
  std::map<std::string, int> index;
  for (std::size_t j = 0; j < sim.col_ids.size(); ++j) index.emplace(sim.col_ids[j], static_cast<int>(j));
  std::vector<int> gt;
  for (const auto& id : sim.row_ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw InvalidArgument("no gallery item with id '" + id + "'");
    gt.push_back(it->second);
  }
  return gt;
}

struct PairReport {
  Modality query;
  Modality gallery;
  RetrievalStats stats;
};

struct RetrievalReport {
  std::vector<PairReport> pairs;          // every ordered pair
  std::vector<PairReport> bidirectional;  // query < gallery, both directions averaged
  RetrievalStats average;                 // mean over ordered pairs
};

inline RetrievalStats average_stats(const std::vector<const RetrievalStats*>& list) {
  require(!list.empty(), "average_stats: nothing to average");
  RetrievalStats out;
  out.ks = list[0]->ks;
  out.recall.assign(out.ks.size(), 0.0);
  for (const auto* s : list) {
    for (std::size_t i = 0; i < out.ks.size(); ++i) out.recall[i] += s->recall[i] / static_cast<double>(list.size());
    out.mrr += s->mrr / static_cast<double>(list.size());
    out.median_rank += s->median_rank / static_cast<double>(list.size());
    out.mean_rank += s->mean_rank / static_cast<double>(list.size());
  }
  return out;
}

inline RetrievalReport cross_modal_report(const std::vector<std::vector<Embedding>>& per_modality,
                                          std::vector<int> ks = {1, 5, 10}) {
  require(per_modality.size() >= 2, "cross_modal_report needs at least two modalities");
  const std::size_t n = per_modality[0].size();
  require(n >= 2, "cross_modal_report needs N >= 2");
  for (const auto& list : per_modality) {
    if (list.size() != n) throw InvalidArgument("cross_modal_report: modality lists differ in length");
    for (std::size_t i = 0; i < n; ++i)
      if (list[i].id != per_modality[0][i].id) throw InvalidArgument("cross_modal_report: misaligned ids");
  }
  RetrievalReport report;
  const std::size_t m = per_modality.size();
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) continue;
      const SimilarityMatrix sim = similarity_matrix(per_modality[a], per_modality[b]);
      std::vector<int> gt(n);
      std::iota(gt.begin(), gt.end(), 0);
      report.pairs.push_back({per_modality[a][0].modality, per_modality[b][0].modality, retrieval_metrics(sim, gt, ks)});
    }
  }
  std::vector<const RetrievalStats*> all;
  for (const auto& p : report.pairs) all.push_back(&p.stats);
  report.average = average_stats(all);
  for (const auto& p : report.pairs) {
    if (static_cast<int>(p.query) >= static_cast<int>(p.gallery)) continue;
    for (const auto& q : report.pairs) {
      if (q.query == p.gallery && q.gallery == p.query)
        report.bidirectional.push_back({p.query, p.gallery, average_stats({&p.stats, &q.stats})});
    }
  }
  return report;
}

// Table-style row: "R@1 24.9, R@5 49.0, R@10 60.6, MRR 0.367, median 9.8, mean 21.2".
inline std::string format_row(const RetrievalStats& s) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < s.ks.size(); ++i) {
    std::snprintf(buf, sizeof buf, "R@%d %.1f, ", s.ks[i], s.recall[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "MRR %.3f, median %.1f, mean %.1f", s.mrr, s.median_rank, s.mean_rank);
  return out + buf;
}

inline std::string report_csv(const RetrievalReport& report) {
  std::ostringstream os;
  os << "query,gallery";
  for (int k : report.average.ks) os << ",R@" << k;
  os << ",MRR,median_rank,mean_rank\n";
  auto row = [&](std::string_view q, std::string_view g, const RetrievalStats& s) {
    char buf[64];
    os << q << ',' << g;
    for (double r : s.recall) {
      std::snprintf(buf, sizeof buf, ",%.4f", r);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.6f,%.4f,%.4f\n", s.mrr, s.median_rank, s.mean_rank);
    os << buf;
  };
  for (const auto& p : report.pairs) row(modality_name(p.query), modality_name(p.gallery), p.stats);
  row("AVERAGE", "AVERAGE", report.average);
  return os.str();
}

inline nlohmann::json stats_json(const RetrievalStats& s) {
  nlohmann::json j;
  for (std::size_t i = 0; i < s.ks.size(); ++i) j["R@" + std::to_string(s.ks[i])] = s.recall[i];
  j["MRR"] = s.mrr;
  j["median_rank"] = s.median_rank;
  j["mean_rank"] = s.mean_rank;
  return j;
}

inline nlohmann::json report_json(const RetrievalReport& report) {
  nlohmann::json j;
  for (const auto& p : report.pairs) {
    auto e = stats_json(p.stats);
    e["query"] = modality_name(p.query);
    e["gallery"] = modality_name(p.gallery);
    j["pairs"].push_back(e);
  }
  for (const auto& p : report.bidirectional) {
    auto e = stats_json(p.stats);
    e["a"] = modality_name(p.query);
    e["b"] = modality_name(p.gallery);
    j["bidirectional"].push_back(e);
  }
  j["average"] = stats_json(report.average);
  j["summary"] = format_row(report.average);
  return j;
}

// ---------------------------------------------------------------------------
// Rotation sweep: -180..180 in 30 degree steps against the unrotated embedding.

using MapEncoder = std::function<std::vector<double>(const EquirectMap&)>;

struct RotationPoint {
  double angle = 0.0;
  double similarity = 0.0;
};

inline std::vector<RotationPoint> rotation_curve(const MapEncoder& encode, const EquirectMap& map) {
  const std::vector<double> reference = encode(map);
  std::vector<RotationPoint> curve;
  for (int k = -6; k <= 6; ++k) {
    const double angle = 30.0 * k;
    const std::vector<double> e = k == 0 ? reference : encode(rotate_yaw(map, angle));
    curve.push_back({angle, cosine_similarity(reference, e)});
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Image metrics on display-referred values.

struct ImageMetrics {
  double psnr = 0.0;  // +infinity when the images are identical
  double rmse = 0.0;
  double si_rmse = 0.0;
  double ssim = 0.0;
  double mae = 0.0;
};

enum class ScaleInvariance { linear, log };

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const int r = size / 2;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

// Separable 'valid' filtering of one channel plane.
inline std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h, const std::vector<double>& k) {
  const int size = static_cast<int>(k.size());
  const int ow = w - size + 1, oh = h - size + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < size; ++i) s += k[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < size; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace detail

// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, range 1), mean over
// the valid region and channels. The window shrinks for images under 11 px.
inline double ssim(const Image& a, const Image& b) {
  require(a.same_shape(b), "ssim: image shapes differ");
  const int size = std::min({11, a.width - (1 - a.width % 2), a.height - (1 - a.height % 2)});
  const auto k = detail::gaussian_window(std::max(size, 1), 1.5);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int w = a.width, h = a.height;
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    std::vector<double> pa(static_cast<std::size_t>(w) * h), pb(pa.size()), aa(pa.size()), bb(pa.size()), ab(pa.size());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        pa[i] = a.at(x, y, c);
        pb[i] = b.at(x, y, c);
        aa[i] = pa[i] * pa[i];
        bb[i] = pb[i] * pb[i];
        ab[i] = pa[i] * pb[i];
      }
    const auto mu_a = detail::filter_valid(pa, w, h, k);
    const auto mu_b = detail::filter_valid(pb, w, h, k);
    const auto e_aa = detail::filter_valid(aa, w, h, k);
    const auto e_bb = detail::filter_valid(bb, w, h, k);
    const auto e_ab = detail::filter_valid(ab, w, h, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double va = e_aa[i] - mu_a[i] * mu_a[i];
      const double vb = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      sum += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / a.channels;
}

inline ImageMetrics image_metrics(const LdrImage& pred, const LdrImage& gt,
                                  ScaleInvariance invariance = ScaleInvariance::linear) {
  const Image& p = pred.image;
  const Image& g = gt.image;
  if (!p.same_shape(g)) throw InvalidArgument("image_metrics: size mismatch");
  for (const Image* img : {&p, &g})
    for (float v : img->data)
      if (!(v >= 0.0f && v <= 1.0f)) throw InvalidArgument("image_metrics: values must be in [0, 1]");

  const auto n = static_cast<double>(p.data.size());
  double se = 0.0, ae = 0.0, pg = 0.0, pp = 0.0;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const double d = static_cast<double>(p.data[i]) - static_cast<double>(g.data[i]);
    se += d * d;
    ae += std::abs(d);
    pg += static_cast<double>(p.data[i]) * g.data[i];
    pp += static_cast<double>(p.data[i]) * p.data[i];
  }
  ImageMetrics m;
  const double mse = se / n;
  m.rmse = std::sqrt(mse);
  m.mae = ae / n;
  m.psnr = mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);

  if (invariance == ScaleInvariance::linear) {
    const double alpha = pp > 0.0 ? pg / pp : 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double d = alpha * p.data[i] - g.data[i];
      s += d * d;
    }
    m.si_rmse = std::sqrt(s / n);
  } else {
    constexpr double eps = 1e-6;
    double mean_diff = 0.0;
    std::vector<double> diff(p.data.size());
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      diff[i] = std::log(p.data[i] + eps) - std::log(g.data[i] + eps);
      mean_diff += diff[i] / n;
    }
    double s = 0.0;
    for (double d : diff) s += (d - mean_diff) * (d - mean_diff);
    m.si_rmse = std::sqrt(s / n);
  }
  m.ssim = ssim(p, g);
  return m;
}

}  // namespace unilight
