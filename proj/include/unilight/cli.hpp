#pragma once

// Command-line front end. run_cli() is callable in-process; tools/main.cpp is
// a thin wrapper. Exit codes: 0 ok, 1 usage error, 2 data or format error.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "unilight/codecs.hpp"
#include "unilight/documents.hpp"
#include "unilight/encoder.hpp"
#include "unilight/envmap.hpp"
#include "unilight/evalkit.hpp"
#include "unilight/learn.hpp"
#include "unilight/lights.hpp"
#include "unilight/sh.hpp"
#include "unilight/store.hpp"
#include "unilight/synthetic.hpp"
#include "unilight/tonemap.hpp"

namespace unilight {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cli {

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  int jobs = 1;
};

inline PipelineConfig load_config(const Common& common) {
  if (common.config_path.empty()) return {};
  try {
    return load_pipeline_config(common.config_path);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

inline std::string yaw_tag(double yaw) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "yaw%03d", static_cast<int>(std::lround(yaw)));
  return buf;
}

inline bool is_radiance_file(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".hdr" || ext == ".pfm";
}

inline std::vector<fs::path> list_panoramas(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_radiance_file(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first error.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

inline void write_text(const fs::path& path, const std::string& text, std::ostream& out) {
  if (path.empty()) out << text;
  else atomic_write(path, text);
}

inline std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  std::string s(bytes.begin(), bytes.end());
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

inline nlohmann::json read_json(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// Text caption for a view: dominant detected light, relative to the view yaw.
inline std::string caption_for(const EquirectMap& rotated, const LightDetectConfig& lights_cfg) {
  try {
    const auto lights = detect_lights(rotated, lights_cfg);
    const LightSource& l = lights.front();
    const auto [lon, polar] = angles_from_direction(l.direction);
    const auto px = rotated.image.pixel(l.u, l.v);
    const int color = nearest_palette_color({px[0], px[1], px[2]});
    return describe_lighting(lon * 180.0 / kPi, 90.0 - polar * 180.0 / kPi, color);
  } catch (const NoLightError&) {
    return "a dark scene with no visible light";
  }
}

// ---------------------------------------------------------------------------
// dataset

struct DatasetOptions {
  int envmap_width = 128;
};

inline int cmd_dataset(const Common& common, const std::string& input, const DatasetOptions& opt, std::ostream& out) {
  PipelineConfig cfg = load_config(common);
  const fs::path in_dir = input.empty() ? fs::path(cfg.input_dir) : fs::path(input);
  const fs::path out_dir = common.out.empty() ? fs::path(cfg.output_dir) : fs::path(common.out);
  if (in_dir.empty() || out_dir.empty()) throw UsageError("dataset needs an input directory and --out");
  if (opt.envmap_width % (2 * cfg.encoder.patch_grid) != 0)
    throw UsageError("--envmap-width must be a multiple of twice the patch grid");
  const auto panoramas = list_panoramas(in_dir);
  if (panoramas.empty()) throw std::runtime_error("no .hdr or .pfm panoramas in " + in_dir.string());

  std::vector<nlohmann::json> entries(panoramas.size());
  parallel_for(panoramas.size(), common.jobs, [&](std::size_t k) {
    const fs::path& src = panoramas[k];
    const std::string id = src.stem().string();
    const fs::path dir = out_dir / id;
    const EquirectMap pano = load_radiance_map(src);
    validate_equirect(pano);
    const ShCoefficients sh = fit_sh(pano);
    atomic_write(dir / "sh.json", dump_document(sh_document(sh)));
    double tau = 0.0;
    std::vector<LightSource> lights;
    try {
      tau = find_threshold(pano, cfg.lights);
      lights = detect_lights(pano, cfg.lights);
    } catch (const NoLightError&) {
    }
    atomic_write(dir / "lights.json", dump_document(lights_document(lights, tau)));

    const EquirectMap small = resample_equirect(pano, opt.envmap_width);
    const DirectionMap dirs = direction_map(small.width(), small.height());
    atomic_write(dir / "direction.pfm", encode_pfm(dirs.image));

    nlohmann::json samples = nlohmann::json::array();
    for (const Crop& crop : crops_from_panorama(pano, cfg.crop.fov, cfg.crop.size)) {
      const std::string tag = yaw_tag(crop.spec.yaw);
      const fs::path crop_path = dir / "crops" / (tag + ".png");
      save_ldr_image(reinhard_tonemap(crop.image, cfg.tonemap.key, cfg.tonemap.gamma), crop_path);

      const EquirectMap view = rotate_yaw(small, crop.spec.yaw);
      const fs::path env_path = dir / "envmap" / (tag + ".hdr");
      save_radiance_image(view.image, env_path);
      save_ldr_image(reinhard_tonemap(view.image, cfg.tonemap.key, cfg.tonemap.gamma),
                     dir / "envmap" / (tag + "_ldr.png"));
      save_ldr_image(LdrImage{log_encode(view.image, cfg.tonemap.i_max).image}, dir / "envmap" / (tag + "_log.png"));

      const ShCoefficients view_sh = rotate_sh_yaw(sh, crop.spec.yaw);
      const Image irr = render_sphere_view(view, view_sh, 0.0, cfg.crop.size, 1.0, false);
      const fs::path irr_path = dir / "irradiance" / (tag + ".png");
      save_ldr_image(reinhard_tonemap(irr, cfg.tonemap.key, cfg.tonemap.gamma), irr_path);

      samples.push_back({{"id", id + "_" + tag},
                         {"group", static_cast<int>(k)},
                         {"yaw", crop.spec.yaw},
                         {"image", fs::relative(crop_path, out_dir).generic_string()},
                         {"envmap", fs::relative(env_path, out_dir).generic_string()},
                         {"irradiance", fs::relative(irr_path, out_dir).generic_string()},
                         {"text", caption_for(view, cfg.lights)},
                         {"sh", sh_document(view_sh)}});
    }
    entries[k] = {{"id", id}, {"source", src.filename().string()}, {"samples", samples}};
  });

  nlohmann::json manifest;
  manifest["seed"] = common.seed;
  manifest["envmap_width"] = opt.envmap_width;
  manifest["panoramas"] = entries;
  atomic_write(out_dir / "manifest.json", dump_document(manifest));
  out << "dataset: " << panoramas.size() << " panoramas, " << 9 * panoramas.size() << " samples -> "
      << out_dir.string() << "\n";
  return 0;
}

// Loads every sample of a dataset directory as training features.
inline std::vector<TrainingSample> load_dataset_samples(const fs::path& dir, std::uint64_t backbone_seed,
                                                        const PipelineConfig& cfg) {
  const nlohmann::json manifest = read_json(dir / "manifest.json");
  std::vector<TrainingSample> out;
  for (const auto& pano : manifest.at("panoramas")) {
    for (const auto& s : pano.at("samples")) {
      TrainingSample t;
      t.id = s.at("id").get<std::string>();
      t.group = s.at("group").get<int>();
      t.sh = sh_from_document(s.at("sh"));
      const EquirectMap env = load_radiance_map(dir / s.at("envmap").get<std::string>());
      t.features[0] = envmap_features(env, backbone_seed, cfg.encoder, cfg.tonemap);
      t.envmap_without_log = envmap_features(env, backbone_seed, cfg.encoder, cfg.tonemap, true);
      t.features[1] = stub_backbone(load_ldr_image(dir / s.at("image").get<std::string>()).image, Modality::image,
                                    backbone_seed, cfg.encoder);
      t.features[2] = stub_backbone(load_ldr_image(dir / s.at("irradiance").get<std::string>()).image,
                                    Modality::irradiance, backbone_seed, cfg.encoder);
      t.features[3] = stub_backbone(s.at("text").get<std::string>(), backbone_seed, cfg.encoder);
      out.push_back(std::move(t));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// fit-sh / render-sh / detect-lights

inline int cmd_fit_sh(const Common& common, const std::string& map_path, std::ostream& out) {
  const ShCoefficients sh = fit_sh(load_radiance_map(map_path));
  write_text(common.out, dump_document(sh_document(sh)), out);
  return 0;
}

inline int cmd_render_sh(const Common& common, const std::string& sh_path, int width, std::ostream& out) {
  if (common.out.empty()) throw UsageError("render-sh needs --out <file.hdr|file.pfm>");
  if (width < 2 || width % 2 != 0) throw UsageError("--width must be even and >= 2");
  const EquirectMap map = render_sh(read_sh_document(sh_path), width, width / 2);
  save_radiance_image(map.image, common.out);
  out << "render-sh: " << width << "x" << width / 2 << " -> " << common.out << "\n";
  return 0;
}

inline int cmd_detect_lights(const Common& common, const std::string& map_path, std::ostream& out) {
  const PipelineConfig cfg = load_config(common);
  const EquirectMap map = load_radiance_map(map_path);
  const double tau = find_threshold(map, cfg.lights);
  write_text(common.out, dump_document(lights_document(detect_lights(map, cfg.lights), tau)), out);
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  int toy = 0;
  std::string dataset;
  std::optional<int> steps;
  std::optional<double> learning_rate;
  std::optional<double> sh_weight;
};

inline std::uint64_t backbone_seed_for(std::uint64_t seed) { return mix_seed(seed, 0xbac4b0e); }

inline int cmd_train(const Common& common, const TrainOptions& opt, std::ostream& out) {
  PipelineConfig cfg = load_config(common);
  if ((opt.toy > 0) == !opt.dataset.empty()) throw UsageError("train needs exactly one of --toy N or --dataset DIR");
  if (common.out.empty()) throw UsageError("train needs --out DIR");
  if (opt.steps) cfg.learn.steps = *opt.steps;
  if (opt.learning_rate) cfg.learn.learning_rate = *opt.learning_rate;
  if (opt.sh_weight) cfg.learn.sh_loss_weight = *opt.sh_weight;
  cfg.learn.seed = common.seed;
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }

  Checkpoint ckpt;
  ckpt.backbone_seed = backbone_seed_for(common.seed);
  std::vector<TrainingSample> samples;
  if (opt.toy > 0) {
    if (opt.toy > 288) throw UsageError("--toy must be in [1, 288]");
    ToyConfig toy;
    toy.count = opt.toy;
    toy.seed = common.seed;
    ckpt.envmap_width = toy.envmap_width;
    for (const ToySample& s : make_toy_samples(toy))
      samples.push_back(featurize(s, static_cast<int>(samples.size()), ckpt.backbone_seed, cfg.encoder, cfg.tonemap));
  } else {
    const nlohmann::json manifest = read_json(fs::path(opt.dataset) / "manifest.json");
    ckpt.envmap_width = manifest.value("envmap_width", 128);
    samples = load_dataset_samples(opt.dataset, ckpt.backbone_seed, cfg);
  }

  std::ostringstream log;
  log << "step,L_C,L_SH,total\n";
  TrainResult result = train(samples, cfg.encoder, cfg.learn, std::nullopt, [&](const LossRecord& r) {
    log << r.step << ',' << r.contrastive << ',' << r.sh << ',' << r.total << '\n';
  });
  ckpt.params = std::move(result.params);
  const fs::path dir(common.out);
  write_checkpoint(dir / "checkpoint.bin", ckpt);
  atomic_write(dir / "loss.csv", log.str());
  out << "train: " << samples.size() << " samples, " << cfg.learn.steps << " steps -> " << (dir / "checkpoint.bin").string()
      << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// embed

inline FeatureSequence features_from_file(Modality m, const fs::path& path, const Checkpoint& ckpt,
                                          const PipelineConfig& cfg) {
  const EncoderConfig& ec = ckpt.params.encoder.config;
  switch (m) {
    case Modality::envmap:
      return envmap_features(resample_equirect(load_radiance_map(path), ckpt.envmap_width), ckpt.backbone_seed, ec,
                             cfg.tonemap);
    case Modality::image:
    case Modality::irradiance:
      return stub_backbone(load_ldr_image(path).image, m, ckpt.backbone_seed, ec);
    case Modality::text:
      return stub_backbone(read_text(path), ckpt.backbone_seed, ec);
  }
  throw InvalidArgument("unknown modality");
}

inline int cmd_embed(const Common& common, const std::string& checkpoint, const std::string& modality_name_arg,
                     const std::string& dataset, const std::vector<std::string>& inputs, std::ostream& out) {
  const PipelineConfig cfg = load_config(common);
  if (common.out.empty()) throw UsageError("embed needs --out <store>");
  if (dataset.empty() == inputs.empty()) throw UsageError("embed needs either --dataset DIR or input files");
  Modality m;
  try {
    m = parse_modality(modality_name_arg);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const Checkpoint ckpt = read_checkpoint(checkpoint);

  std::vector<std::pair<std::string, std::function<FeatureSequence()>>> jobs;
  if (!dataset.empty()) {
    const fs::path dir(dataset);
    const nlohmann::json manifest = read_json(dir / "manifest.json");
    for (const auto& pano : manifest.at("panoramas")) {
      for (const auto& s : pano.at("samples")) {
        const std::string id = s.at("id").get<std::string>();
        if (m == Modality::text) {
          const std::string text = s.at("text").get<std::string>();
          jobs.emplace_back(id, [&ckpt, text] { return stub_backbone(text, ckpt.backbone_seed, ckpt.params.encoder.config); });
        } else {
          const char* key = m == Modality::envmap ? "envmap" : m == Modality::image ? "image" : "irradiance";
          const fs::path path = dir / s.at(key).get<std::string>();
          jobs.emplace_back(id, [&, m, path] { return features_from_file(m, path, ckpt, cfg); });
        }
      }
    }
  } else {
    for (const auto& p : inputs) {
      const fs::path path(p);
      jobs.emplace_back(path.stem().string(), [&, m, path] { return features_from_file(m, path, ckpt, cfg); });
    }
  }

  std::vector<Embedding> embeddings(jobs.size());
  parallel_for(jobs.size(), common.jobs, [&](std::size_t i) {
    embeddings[i] = encode(ckpt.params.encoder, jobs[i].second(), jobs[i].first);
  });
  const EncoderConfig& ec = ckpt.params.encoder.config;
  atomic_write(common.out, encode_embedding_store(embeddings, ec.tokens, ec.dim, m));
  out << "embed: " << embeddings.size() << " " << modality_name(m) << " embeddings -> " << common.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval-retrieval

inline int cmd_eval_retrieval(const Common& common, const std::vector<std::string>& stores, std::ostream& out) {
  const PipelineConfig cfg = load_config(common);
  if (stores.size() < 2) throw UsageError("eval-retrieval needs at least two embedding stores");
  std::vector<std::vector<Embedding>> per_modality;
  for (const auto& path : stores) {
    EmbeddingStore s = read_embedding_store(path);
    std::sort(s.embeddings.begin(), s.embeddings.end(), [](const Embedding& a, const Embedding& b) { return a.id < b.id; });
    per_modality.push_back(std::move(s.embeddings));
  }
  const RetrievalReport report = cross_modal_report(per_modality, cfg.eval_ks);
  if (common.out.empty()) {
    out << report_csv(report);
  } else {
    atomic_write(common.out, report_csv(report));
    fs::path json_path(common.out);
    json_path.replace_extension(".json");
    atomic_write(json_path, dump_document(report_json(report)));
  }
  std::cerr << format_row(report.average) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// rotate-exp

inline int cmd_rotate_exp(const Common& common, const std::string& checkpoint, const std::string& encoder_kind,
                          const std::vector<std::string>& maps, std::ostream& out) {
  const PipelineConfig cfg = load_config(common);
  if (maps.empty()) throw UsageError("rotate-exp needs at least one map");
  MapEncoder encoder;
  std::optional<Checkpoint> ckpt;
  if (encoder_kind == "sh") {
    encoder = [](const EquirectMap& m) {
      const ShCoefficients sh = fit_sh(m);
      std::vector<double> v;
      for (const auto& ch : sh.channels) v.insert(v.end(), ch.begin(), ch.end());
      return v;
    };
  } else if (encoder_kind == "checkpoint") {
    if (checkpoint.empty()) throw UsageError("rotate-exp needs --checkpoint or --encoder sh");
    ckpt = read_checkpoint(checkpoint);
    encoder = [&](const EquirectMap& m) {
      const FeatureSequence f = envmap_features(m, ckpt->backbone_seed, ckpt->params.encoder.config, cfg.tonemap);
      return flatten_normalized(encode(ckpt->params.encoder, f).tokens);
    };
  } else {
    throw UsageError("--encoder must be checkpoint or sh");
  }

  std::vector<std::vector<RotationPoint>> curves(maps.size());
  parallel_for(maps.size(), common.jobs, [&](std::size_t i) {
    EquirectMap m = load_radiance_map(maps[i]);
    if (ckpt) m = resample_equirect(m, ckpt->envmap_width);
    curves[i] = rotation_curve(encoder, m);
  });
  std::ostringstream csv;
  csv << "map,angle_deg,cosine_similarity\n";
  char buf[64];
  for (std::size_t i = 0; i < maps.size(); ++i)
    for (const auto& p : curves[i]) {
      std::snprintf(buf, sizeof buf, ",%.0f,%.6f\n", p.angle, p.similarity);
      csv << fs::path(maps[i]).stem().string() << buf;
    }
  write_text(common.out, csv.str(), out);
  return 0;
}

// ---------------------------------------------------------------------------
// eval-render

inline int cmd_eval_render(const Common& common, const std::string& pred_dir, const std::string& gt_dir,
                           std::ostream& out) {
  const PipelineConfig cfg = load_config(common);
  if (!fs::is_directory(pred_dir) || !fs::is_directory(gt_dir))
    throw std::runtime_error("eval-render needs two existing directories");
  std::vector<fs::path> names;
  for (const auto& e : fs::directory_iterator(gt_dir))
    if (e.is_regular_file() && e.path().extension() == ".png") names.push_back(e.path().filename());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw std::runtime_error("no .png files in " + gt_dir);

  std::ostringstream csv;
  csv << "image,PSNR,RMSE,SI-RMSE,SSIM,MAE\n";
  ImageMetrics mean;
  int finite_psnr = 0;
  char buf[160];
  for (const auto& name : names) {
    const fs::path pred = fs::path(pred_dir) / name;
    if (!fs::exists(pred)) throw std::runtime_error("missing prediction for " + name.string());
    const ImageMetrics m = image_metrics(load_ldr_image(pred), load_ldr_image(fs::path(gt_dir) / name), cfg.si_mode);
    std::snprintf(buf, sizeof buf, ",%.4f,%.6f,%.6f,%.6f,%.6f\n", m.psnr, m.rmse, m.si_rmse, m.ssim, m.mae);
    csv << name.stem().string() << buf;
    if (std::isfinite(m.psnr)) {
      mean.psnr += m.psnr;
      ++finite_psnr;
    }
    mean.rmse += m.rmse / names.size();
    mean.si_rmse += m.si_rmse / names.size();
    mean.ssim += m.ssim / names.size();
    mean.mae += m.mae / names.size();
  }
  mean.psnr = finite_psnr ? mean.psnr / finite_psnr : std::numeric_limits<double>::infinity();
  std::snprintf(buf, sizeof buf, "MEAN,%.4f,%.6f,%.6f,%.6f,%.6f\n", mean.psnr, mean.rmse, mean.si_rmse, mean.ssim,
                mean.mae);
  csv << buf;
  write_text(common.out, csv.str(), out);
  return 0;
}

}  // namespace cli

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"unilight: lighting representation toolkit"};
  app.name("unilight");
  app.require_subcommand(1);
  cli::Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON pipeline config");
    sub->add_option("--seed", common.seed, "seed for every random choice");
    sub->add_option("--out", common.out, "output path");
    sub->add_option("--jobs", common.jobs, "worker threads")->check(CLI::Range(1, 256));
  };

  std::string input, sh_path, checkpoint, modality = "envmap", dataset, encoder_kind = "checkpoint", pred_dir, gt_dir;
  std::vector<std::string> inputs;
  cli::DatasetOptions dataset_opt;
  cli::TrainOptions train_opt;
  int width = 256;

  auto* c_dataset = app.add_subcommand("dataset", "panorama directory -> crops, encodings, lights, SH");
  add_common(c_dataset);
  c_dataset->add_option("input", input, "directory of .hdr/.pfm panoramas");
  c_dataset->add_option("--envmap-width", dataset_opt.envmap_width, "environment-map payload width");

  auto* c_fit = app.add_subcommand("fit-sh", "fit degree-3 SH to a panorama");
  add_common(c_fit);
  c_fit->add_option("map", input, "panorama (.hdr/.pfm)")->required();

  auto* c_render = app.add_subcommand("render-sh", "render an SH document to a panorama");
  add_common(c_render);
  c_render->add_option("sh", sh_path, "SH document")->required();
  c_render->add_option("--width", width, "output width");

  auto* c_lights = app.add_subcommand("detect-lights", "detect light sources in a panorama");
  add_common(c_lights);
  c_lights->add_option("map", input, "panorama (.hdr/.pfm)")->required();

  auto* c_train = app.add_subcommand("train", "train the encoder");
  add_common(c_train);
  c_train->add_option("--toy", train_opt.toy, "train on N synthetic samples");
  c_train->add_option("--dataset", train_opt.dataset, "dataset directory from `dataset`");
  c_train->add_option("--steps", train_opt.steps, "training steps");
  c_train->add_option("--lr", train_opt.learning_rate, "learning rate");
  c_train->add_option("--sh-weight", train_opt.sh_weight, "SH loss weight (0 disables SH supervision)");

  auto* c_embed = app.add_subcommand("embed", "payloads -> embedding store");
  add_common(c_embed);
  c_embed->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  c_embed->add_option("--modality", modality, "envmap | image | irradiance | text");
  c_embed->add_option("--dataset", dataset, "dataset directory");
  c_embed->add_option("inputs", inputs, "payload files");

  auto* c_eval = app.add_subcommand("eval-retrieval", "embedding stores -> retrieval report CSV");
  add_common(c_eval);
  c_eval->add_option("stores", inputs, "one store per modality")->required();

  auto* c_rot = app.add_subcommand("rotate-exp", "similarity vs yaw rotation CSV");
  add_common(c_rot);
  c_rot->add_option("--checkpoint", checkpoint, "trained checkpoint");
  c_rot->add_option("--encoder", encoder_kind, "checkpoint | sh");
  c_rot->add_option("maps", inputs, "panoramas")->required();

  auto* c_render_eval = app.add_subcommand("eval-render", "image metrics between two PNG directories");
  add_common(c_render_eval);
  c_render_eval->add_option("--pred", pred_dir, "predicted images")->required();
  c_render_eval->add_option("--gt", gt_dir, "reference images")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (c_dataset->parsed()) return cli::cmd_dataset(common, input, dataset_opt, out);
    if (c_fit->parsed()) return cli::cmd_fit_sh(common, input, out);
    if (c_render->parsed()) return cli::cmd_render_sh(common, sh_path, width, out);
    if (c_lights->parsed()) return cli::cmd_detect_lights(common, input, out);
    if (c_train->parsed()) return cli::cmd_train(common, train_opt, out);
    if (c_embed->parsed()) return cli::cmd_embed(common, checkpoint, modality, dataset, inputs, out);
    if (c_eval->parsed()) return cli::cmd_eval_retrieval(common, inputs, out);
    if (c_rot->parsed()) return cli::cmd_rotate_exp(common, checkpoint, encoder_kind, inputs, out);
    if (c_render_eval->parsed()) return cli::cmd_eval_render(common, pred_dir, gt_dir, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace unilight
