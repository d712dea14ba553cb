// Acceptance run: one PASS/FAIL line per criterion; non-zero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "unilight/cli.hpp"
#include "unilight/codecs.hpp"
#include "unilight/evalkit.hpp"
#include "unilight/learn.hpp"
#include "unilight/lights.hpp"
#include "unilight/sh.hpp"
#include "unilight/store.hpp"
#include "unilight/synthetic.hpp"

using namespace unilight;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %2d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ShCoefficients random_coeffs(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ShCoefficients c;
  for (auto& ch : c.channels)
    for (double& v : ch) v = u(rng);
  return c;
}

double max_abs_diff(const ShCoefficients& a, const ShCoefficients& b) {
  double m = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < kShCount; ++i) m = std::max(m, std::abs(a(c, i) - b(c, i)));
  return m;
}

Vec3 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec3 v;
  do v = Vec3(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6);
  return v.normalized();
}

// ---------------------------------------------------------------------------

void criterion_sh_analytic() {
  const auto t0 = Clock::now();
  double worst_const = 0.0;
  worst_const = std::max(worst_const, std::abs(sh_basis(Vec3(0, 0, 1))[0] - 0.28209479));
  worst_const = std::max(worst_const, std::abs(sh_basis(Vec3(0, 0, 1))[sh_index(1, 0)] - 0.48860251));

  const int w = 256, h = 128;
  const Image weights = solid_angle_weights(w, h);
  Eigen::Matrix<double, kShCount, kShCount> gram = Eigen::Matrix<double, kShCount, kShCount>::Zero();
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const auto b = sh_basis(pixel_direction(w, h, u, v));
      const Eigen::Map<const Eigen::Matrix<double, kShCount, 1>> y(b.data());
      gram.noalias() += weights.at(u, v) * y * y.transpose();
    }
  const double gram_err = (gram - Eigen::Matrix<double, kShCount, kShCount>::Identity()).cwiseAbs().maxCoeff();

  const ShCoefficients constant = fit_sh(EquirectMap(w, h, 0.5f));
  const double c0_err = std::abs(constant(0, 0) - std::sqrt(kPi));

  std::mt19937_64 rng(1);
  double idem = 0.0;
  for (int k = 0; k < 10; ++k) {
    const ShCoefficients c = random_coeffs(rng);
    idem = std::max(idem, max_abs_diff(fit_sh(render_sh(c, w, h)), c));
  }
  const double t = seconds_since(t0);
  report(1, worst_const <= 1e-7 && gram_err <= 1e-3 && c0_err <= 1e-3 && idem <= 1e-3 && t < 10.0,
         fmt("SH analytic suite: constants err %.1e, Gram err %.2e, c0 err %.2e, fit(render) err %.2e, %.2f s",
             worst_const, gram_err, c0_err, idem, t));
}

void criterion_dominant_direction() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  const int w = 256, h = 128, trials = 50;
  int hits = 0;
  double worst = 0.0;
  for (int k = 0; k < trials; ++k) {
    const Vec3 s = random_direction(rng);
    EquirectMap m(w, h);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        const Vec3 d = pixel_direction(w, h, u, v);
        const float val = static_cast<float>(0.05 + 20.0 * std::exp(60.0 * (d.dot(s) - 1.0)));
        for (int c = 0; c < 3; ++c) m.at(u, v, c) = val;
      }
    const Vec3 est = dominant_direction(fit_sh(m));
    const double err = std::acos(std::clamp(est.dot(s), -1.0, 1.0)) * 180.0 / kPi;
    worst = std::max(worst, err);
    hits += err <= 2.0;
  }
  const double t = seconds_since(t0);
  report(2, hits >= 48 && t < 30.0,
         fmt("dominant direction within 2 deg on %d/%d single-light maps (worst %.3f deg), %.2f s", hits, trials,
             worst, t));
}

void criterion_sh_rotation() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> angle(-180.0, 180.0);
  double worst = 0.0, norm_err = 0.0;
  for (int k = 0; k < 20; ++k) {
    const ShCoefficients c = random_coeffs(rng);
    const double a = angle(rng);
    const ShCoefficients rotated = rotate_sh_yaw(c, a);
    const ShCoefficients oracle = fit_sh(rotate_yaw(render_sh(c, 512, 256), a));
    worst = std::max(worst, max_abs_diff(rotated, oracle));
    norm_err = std::max(norm_err, std::abs(rotated.norm() - c.norm()));
  }
  report(3, worst <= 1e-3 && norm_err <= 1e-9,
         fmt("rotate_sh_yaw vs refit after map rotation: max coeff err %.2e; norm err %.1e", worst, norm_err));
}

void criterion_gradients() {
  using S = long double;
  const auto t0 = Clock::now();
  EncoderConfig c;
  c.tokens = 2;
  c.dim = 4;
  c.model_dim = 4;
  c.heads = 2;
  c.head_hidden = 3;
  c.backbone_dim = 3;
  c.text_tokens = 3;
  c.patch_grid = 2;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_image = [&](int w, int h) {
    Image img(w, h, 3);
    for (float& v : img.data) v = static_cast<float>(u(rng));
    return img;
  };
  const char* captions[] = {"a warm light from three", "cold light overhead", "red glow near the horizon"};
  std::vector<TrainingSample> samples;
  for (int i = 0; i < 3; ++i) {
    TrainingSample s;
    s.id = std::to_string(i);
    s.group = i;
    Image env = random_image(4, 2);
    for (float& v : env.data) v *= 8.0f;
    const EquirectMap map(env);
    s.features[0] = stub_backbone(envmap_payload(map), Modality::envmap, 5, c);
    s.features[1] = stub_backbone(random_image(4, 4), Modality::image, 5, c);
    s.features[2] = stub_backbone(random_image(4, 4), Modality::irradiance, 5, c);
    s.features[3] = stub_backbone(captions[i], 5, c);
    s.envmap_without_log = stub_backbone(envmap_payload(map, {}, true), Modality::envmap, 5, c);
    s.sh = random_coeffs(rng);
    samples.push_back(std::move(s));
  }
  LearnConfig lc;
  lc.learn_temperature = true;
  const auto p0 = init_model<S>(c, lc, 6);
  const std::vector<const TrainingSample*> batch{&samples[0], &samples[1], &samples[2]};
  const std::vector<bool> drop{false, true, false};
  const auto loss = total_loss<S>(batch, p0, lc, drop);
  std::function<S(std::span<const S>)> f = [&](std::span<const S> x) {
    auto p = p0;
    scatter_params<S>(p, x);
    return total_loss<S>(batch, p, lc, drop).total;
  };
  const auto rep = grad_check<S>(f, flatten_params<S>(loss.grads), flatten_params<S>(p0), 1e-4);
  const double t = seconds_since(t0);
  report(4, rep.passed && t < 60.0,
         fmt("total_loss gradient check over %zu parameters: max relative error %.2e, %.2f s", rep.checked,
             rep.max_relative_error, t));
}

// ---------------------------------------------------------------------------
// Toy contrastive study shared by criteria 5, 6 and 7.

constexpr int kToyCount = 256;
constexpr int kToyTrain = 192;
constexpr int kToySteps = 1000;
constexpr std::uint64_t kToyDataSeed = 7;
constexpr std::uint64_t kBackboneSeed = 11;

struct ToyStudy {
  std::vector<ToySample> toys;
  std::vector<TrainingSample> samples;
  EncoderConfig encoder;
  std::span<const TrainingSample> train_set() const { return {samples.data(), kToyTrain}; }
  std::span<const TrainingSample> held_out() const {
    return {samples.data() + kToyTrain, samples.size() - kToyTrain};
  }
};

ToyStudy make_study() {
  ToyStudy s;
  ToyConfig tc;
  tc.count = kToyCount;
  tc.seed = kToyDataSeed;
  s.toys = make_toy_samples(tc);
  for (int i = 0; i < kToyCount; ++i) s.samples.push_back(featurize(s.toys[i], i, kBackboneSeed, s.encoder));
  return s;
}

double held_out_r1(const ToyStudy& study, const EncoderParams<float>& params) {
  return cross_modal_report(embed_samples(params, study.held_out())).average.recall_at(1);
}

TrainResult train_toy(const ToyStudy& study, std::uint64_t seed, double sh_weight) {
  LearnConfig lc;
  lc.steps = kToySteps;
  lc.seed = seed;
  lc.sh_loss_weight = sh_weight;
  return train(study.train_set(), study.encoder, lc);
}

void criterion_rotation_shape(const ToyStudy& study, const EncoderParams<float>& params) {
  const MapEncoder encoder = [&](const EquirectMap& m) {
    return flatten_normalized(encode(params, envmap_features(m, kBackboneSeed, study.encoder)).tokens);
  };
  int good = 0;
  bool unit_at_zero = true;
  double near_sum = 0.0, far_sum = 0.0;
  const int maps = 20;
  for (int k = 0; k < maps; ++k) {
    const auto curve = rotation_curve(encoder, study.toys[kToyTrain + k].envmap);
    double near = 0.0, far = 0.0;
    int n_near = 0, n_far = 0;
    for (const auto& p : curve) {
      if (std::abs(p.angle) <= 30.0) near += p.similarity, ++n_near;
      if (std::abs(p.angle) >= 150.0) far += p.similarity, ++n_far;
    }
    near /= n_near;
    far /= n_far;
    near_sum += near;
    far_sum += far;
    good += far < near;
    unit_at_zero = unit_at_zero && std::abs(curve[6].similarity - 1.0) < 1e-9;
  }
  report(6, unit_at_zero && good >= 18,
         fmt("rotation curve: sim(0)=1 %s; far < near on %d/%d held-out maps (mean near %.3f, far %.3f)",
             unit_at_zero ? "yes" : "no", good, maps, near_sum / maps, far_sum / maps));
}

void criteria_toy_study() {
  const auto t0 = Clock::now();
  const ToyStudy study = make_study();
  const double featurize_time = seconds_since(t0);

  LearnConfig untrained_cfg;
  const double untrained = held_out_r1(study, init_model<float>(study.encoder, untrained_cfg, 0).encoder);
  const double chance = 100.0 / static_cast<double>(study.held_out().size());

  const auto t1 = Clock::now();
  const TrainResult sh3 = train_toy(study, 0, 1.0);
  const double trained = held_out_r1(study, sh3.params.encoder);
  const double study_time = featurize_time + seconds_since(t1);
  report(5, trained >= 90.0 && std::abs(untrained - chance) <= 5.0 && kToySteps <= 2000 && study_time < 600.0,
         fmt("toy study: held-out R@1 %.1f%% after %d steps (untrained %.1f%%, chance %.2f%%), %.0f s", trained,
             kToySteps, untrained, chance, study_time));

  criterion_rotation_shape(study, sh3.params.encoder);

  std::vector<double> with_sh{trained}, without_sh;
  without_sh.push_back(held_out_r1(study, train_toy(study, 0, 0.0).params.encoder));
  for (std::uint64_t seed : {1, 2}) {
    with_sh.push_back(held_out_r1(study, train_toy(study, seed, 1.0).params.encoder));
    without_sh.push_back(held_out_r1(study, train_toy(study, seed, 0.0).params.encoder));
  }
  const double mean_sh = std::accumulate(with_sh.begin(), with_sh.end(), 0.0) / 3.0;
  const double mean_nosh = std::accumulate(without_sh.begin(), without_sh.end(), 0.0) / 3.0;
  report(7, mean_nosh < mean_sh,
         fmt("ablation: mean held-out R@1 SH3 %.1f%% (%.1f/%.1f/%.1f) vs NOSH %.1f%% (%.1f/%.1f/%.1f)", mean_sh,
             with_sh[0], with_sh[1], with_sh[2], mean_nosh, without_sh[0], without_sh[1], without_sh[2]));
}

// ---------------------------------------------------------------------------

void criterion_retrieval_oracle() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 99);
  const std::vector<int> ks{1, 5, 10};
  int exact = 0;
  for (int trial = 0; trial < 50; ++trial) {
    SimilarityMatrix sim;
    sim.values.resize(100, 100);
    // Coarse values so ties occur.
    for (Eigen::Index i = 0; i < sim.values.size(); ++i) sim.values.data()[i] = std::round(u(rng) * 40.0) / 40.0;
    std::vector<int> gt(100);
    for (int& g : gt) g = pick(rng);
    const RetrievalStats s = retrieval_metrics(sim, gt, ks);

    std::vector<int> ranks;
    for (int q = 0; q < 100; ++q) {
      std::vector<int> order(100);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sim.values(q, a) > sim.values(q, b); });
      ranks.push_back(static_cast<int>(std::find(order.begin(), order.end(), gt[q]) - order.begin()) + 1);
    }
    bool ok = ranks == s.ranks;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      int hits = 0;
      for (int r : ranks) hits += r <= ks[i];
      ok = ok && s.recall[i] == 100.0 * hits / 100.0;
    }
    double rr = 0.0, sum = 0.0;
    for (int r : ranks) rr += 1.0 / r, sum += r;
    std::vector<int> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    const double med = 0.5 * (sorted[49] + sorted[50]);
    ok = ok && s.mrr == rr / 100.0 && s.mean_rank == sum / 100.0 && s.median_rank == med;
    exact += ok;
  }
  report(8, exact == 50, fmt("retrieval metrics match the sort oracle exactly on %d/50 matrices", exact));
}

void criterion_lights() {
  auto disc = [](EquirectMap& m, const Vec3& center, double radius_deg, float value) {
    const double cos_r = std::cos(radius_deg * kPi / 180.0);
    for (int v = 0; v < m.height(); ++v)
      for (int u = 0; u < m.width(); ++u)
        if (pixel_direction(m.width(), m.height(), u, v).dot(center) >= cos_r)
          for (int c = 0; c < 3; ++c) m.at(u, v, c) = value;
  };
  auto set = [](EquirectMap& m, int u, int v, float value) {
    for (int c = 0; c < 3; ++c) m.at(u, v, c) = value;
  };
  bool ok = true;
  std::string detail;

  EquirectMap two(128, 64, 0.05f);
  disc(two, pixel_direction(128, 64, 30, 20), 6.0, 6.0f);
  disc(two, pixel_direction(128, 64, 90, 40), 6.0, 5.0f);
  set(two, 30, 20, 12.0f);
  set(two, 90, 40, 9.0f);
  const auto a = detect_lights(two);
  ok = ok && a.size() == 2 && a[0].u == 30 && a[0].v == 20 && a[1].u == 90 && a[1].v == 40;
  detail += fmt("two-disc: %zu lights", a.size());

  EquirectMap seam(128, 64, 0.05f);
  disc(seam, pixel_direction(128, 64, 0, 30), 5.0, 6.0f);  // straddles u = 0 / 127
  set(seam, 127, 30, 10.0f);
  const auto b = detect_lights(seam);
  ok = ok && b.size() == 1 && b[0].u == 127 && b[0].v == 30;
  detail += fmt(", seam: %zu light(s)", b.size());

  const double expected[] = {4.0, 4.0 / std::sqrt(2.0), 2.0};
  const float peaks[] = {5.0f, 3.0f, 2.5f};
  for (int k = 0; k < 3; ++k) {
    EquirectMap m(32, 16, 0.0f);
    set(m, 7, 7, peaks[k]);
    const double tau = find_threshold(m);
    ok = ok && tau == expected[k];
    detail += fmt(", tau %.4f", tau);
  }
  report(9, ok, detail);
}

void criterion_codecs() {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.0, 1.0);

  Image img(33, 17, 3);
  for (float& v : img.data) v = static_cast<float>(n(rng) * 50.0);
  const std::string pfm = encode_pfm(img);
  const Image pfm_back = decode_pfm({pfm.begin(), pfm.end()});
  const bool pfm_ok = std::memcmp(pfm_back.data.data(), img.data.data(), img.data.size() * 4) == 0;

  std::vector<Embedding> list;
  for (int i = 0; i < 20; ++i) {
    Embedding e{Mat<float>(8, 512), Modality::envmap, "e" + std::to_string(i)};
    for (Eigen::Index k = 0; k < e.tokens.size(); ++k) e.tokens.data()[k] = static_cast<float>(n(rng));
    list.push_back(std::move(e));
  }
  const std::string store = encode_embedding_store(list, 8, 512, Modality::envmap);
  const auto store_back = decode_embedding_store({store.begin(), store.end()});
  bool store_ok = store_back.embeddings.size() == list.size();
  for (std::size_t i = 0; store_ok && i < list.size(); ++i)
    store_ok = store_back.embeddings[i].id == list[i].id &&
               std::memcmp(store_back.embeddings[i].tokens.data(), list[i].tokens.data(), 8 * 512 * 4) == 0;

  Image hdr(64, 32, 3);
  for (float& v : hdr.data) v = static_cast<float>(std::exp(n(rng) * 3.0));
  const std::string rgbe = encode_rgbe(hdr);
  const Image rgbe_back = decode_rgbe({rgbe.begin(), rgbe.end()});
  double rgbe_err = 0.0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x) {
      const auto p = hdr.pixel(x, y);
      const double peak = std::max({p[0], p[1], p[2]});
      for (int c = 0; c < 3; ++c) rgbe_err = std::max(rgbe_err, std::abs(rgbe_back.at(x, y, c) - p[c]) / peak);
    }

  const fs::path dir = fs::temp_directory_path() / "unilight_acceptance_png";
  fs::create_directories(dir);
  LdrImage ldr{Image(40, 30, 3)};
  for (float& v : ldr.image.data) v = static_cast<float>(u(rng));
  save_ldr_image(ldr, dir / "q.png");
  const LdrImage ldr_back = load_ldr_image(dir / "q.png");
  double png_err = 0.0;
  for (std::size_t i = 0; i < ldr.image.data.size(); ++i)
    png_err = std::max(png_err, static_cast<double>(std::abs(ldr_back.image.data[i] - ldr.image.data[i])));
  fs::remove_all(dir);

  report(10, pfm_ok && store_ok && rgbe_err <= 1.0 / 256.0 && png_err <= 0.5 / 255.0 + 1e-7,
         fmt("PFM bit-exact %s, store bit-exact %s, RGBE rel err %.5f (<= %.5f), PNG err %.6f (<= %.6f)",
             pfm_ok ? "yes" : "no", store_ok ? "yes" : "no", rgbe_err, 1.0 / 256.0, png_err, 0.5 / 255.0));
}

void criterion_metrics() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  LdrImage gt{Image(32, 32, 3)};
  for (float& v : gt.image.data) v = static_cast<float>(u(rng));
  const auto same = image_metrics(gt, gt);

  // 64 of 100 values off by 0.125 (exact in binary): MSE = 0.01.
  LdrImage a{Image(10, 10, 1, 0.5f)}, b{Image(10, 10, 1, 0.5f)};
  for (int i = 0; i < 100; ++i) b.image.data[i] = i < 64 ? 0.625f : 0.5f;  // 64 * 0.015625 / 100 = 0.01
  const auto psnr = image_metrics(a, b);

  LdrImage doubled = gt;
  for (float& v : doubled.image.data) v *= 2.0f;
  const auto si = image_metrics(doubled, gt);

  const bool ok = same.rmse == 0.0 && std::abs(same.ssim - 1.0) <= 1e-6 && std::isinf(same.psnr) &&
                  std::abs(psnr.psnr - 20.0) <= 1e-6 && std::abs(si.si_rmse) <= 1e-6;
  report(11, ok,
         fmt("identity RMSE %.1g SSIM %.9f PSNR %s; PSNR(MSE=0.01) %.9f dB; SI-RMSE(2 gt, gt) %.1e", same.rmse,
             same.ssim, std::isinf(same.psnr) ? "inf" : "finite", psnr.psnr, si.si_rmse));
}

// Two fixture panoramas: a sun over a sky gradient, and two colored lamps.
void write_fixtures(const fs::path& dir) {
  fs::create_directories(dir);
  const int w = 256, h = 128;
  EquirectMap sky(w, h), room(w, h);
  const Vec3 sun = direction_from_angles(0.6, 0.7);
  const Vec3 lamp_a = direction_from_angles(-1.2, 1.3), lamp_b = direction_from_angles(2.2, 1.1);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const Vec3 d = pixel_direction(w, h, u, v);
      const double s = 40.0 * std::exp(200.0 * (d.dot(sun) - 1.0));
      const double base = d.y() > 0 ? 0.4 + 0.3 * d.y() : 0.1;
      const double la = 15.0 * std::exp(300.0 * (d.dot(lamp_a) - 1.0));
      const double lb = 12.0 * std::exp(300.0 * (d.dot(lamp_b) - 1.0));
      const double rgb_sky[3] = {base * 0.8 + s, base * 0.9 + s * 0.95, base + s * 0.85};
      const double rgb_room[3] = {0.2 + la, 0.18 + 0.6 * la + 0.7 * lb, 0.15 + 0.3 * la + lb};
      for (int c = 0; c < 3; ++c) {
        sky.at(u, v, c) = static_cast<float>(rgb_sky[c]);
        room.at(u, v, c) = static_cast<float>(rgb_room[c]);
      }
    }
  save_radiance_image(sky.image, dir / "outdoor.hdr");
  save_radiance_image(room.image, dir / "indoor.hdr");
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  return files;
}

void criterion_cli(Clock::time_point suite_start) {
  const fs::path root = fs::temp_directory_path() / "unilight_acceptance_cli";
  fs::remove_all(root);
  write_fixtures(root / "panos");
  std::ostringstream out, err;
  const int rc1 = run_cli({"dataset", (root / "panos").string(), "--out", (root / "run1").string(), "--seed", "5"},
                          out, err);
  const int rc2 = run_cli({"dataset", (root / "panos").string(), "--out", (root / "run2").string(), "--seed", "5"},
                          out, err);
  bool ok = rc1 == 0 && rc2 == 0;
  int crops = 0, sh_docs = 0, light_docs = 0;
  bool identical = false;
  if (ok) {
    const auto a = snapshot(root / "run1");
    const auto b = snapshot(root / "run2");
    identical = a == b;
    for (const auto& [name, bytes] : a) {
      crops += name.find("/crops/") != std::string::npos && name.ends_with(".png");
      sh_docs += name.ends_with("/sh.json");
      light_docs += name.ends_with("/lights.json");
    }
  }
  fs::remove_all(root);
  const double total = seconds_since(suite_start);
  ok = ok && identical && crops == 18 && sh_docs == 2 && light_docs == 2 && total < 900.0;
  report(12, ok,
         fmt("dataset CLI: exit %d/%d, %d crops, %d SH documents, %d light lists, reruns byte-identical %s; "
             "suite time %.0f s",
             rc1, rc2, crops, sh_docs, light_docs, identical ? "yes" : "no", total));
  if (!err.str().empty()) std::fprintf(stderr, "%s", err.str().c_str());
}

}  // namespace

int main() {
  const auto start = Clock::now();
  criterion_sh_analytic();
  criterion_dominant_direction();
  criterion_sh_rotation();
  criterion_gradients();
  criteria_toy_study();
  criterion_retrieval_oracle();
  criterion_lights();
  criterion_codecs();
  criterion_metrics();
  criterion_cli(start);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
