#pragma once

// JSON documents: SH coefficients, light lists, and the pipeline config.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unilight/codecs.hpp"
#include "unilight/encoder.hpp"
#include "unilight/envmap.hpp"
#include "unilight/error.hpp"
#include "unilight/evalkit.hpp"
#include "unilight/learn.hpp"
#include "unilight/lights.hpp"
#include "unilight/sh.hpp"
#include "unilight/tonemap.hpp"

namespace unilight {

constexpr const char* kShBasisName = "real-orthonormal-yup";

inline nlohmann::json sh_document(const ShCoefficients& sh) {
  nlohmann::json channels = nlohmann::json::array();
  for (const auto& ch : sh.channels) channels.push_back(ch);
  return {{"degree", kShDegree}, {"channels", channels}, {"basis", kShBasisName}};
}

inline ShCoefficients sh_from_document(const nlohmann::json& j) {
  try {
    if (j.at("degree").get<int>() != kShDegree) throw FormatError("SH document: only degree 3 is supported");
    if (j.at("basis").get<std::string>() != kShBasisName) throw FormatError("SH document: unknown basis");
    const auto& channels = j.at("channels");
    if (!channels.is_array() || channels.size() != 3) throw FormatError("SH document: expected 3 channels");
    ShCoefficients sh;
    for (int c = 0; c < 3; ++c) {
      if (channels[c].size() != kShCount) throw FormatError("SH document: expected 16 coefficients per channel");
      for (int i = 0; i < kShCount; ++i) sh(c, i) = channels[c][i].get<double>();
    }
    return sh;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("SH document: ") + e.what());
  }
}

inline ShCoefficients read_sh_document(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return sh_from_document(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("SH document: ") + e.what());
  }
}

inline nlohmann::json lights_document(const std::vector<LightSource>& lights, double threshold) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& l : lights)
    list.push_back({{"direction", {l.direction.x(), l.direction.y(), l.direction.z()}},
                    {"pixel", {l.u, l.v}},
                    {"peak", l.peak_radiance},
                    {"area", l.region_area}});
  return {{"threshold", threshold}, {"lights", list}};
}

inline std::string dump_document(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Pipeline config. Every section is optional; unknown keys are errors.

struct PipelineConfig {
  std::string input_dir;
  std::string output_dir;
  CropSpec crop{0.0, 90.0, 512};
  TonemapConfig tonemap;
  LightDetectConfig lights;
  EncoderConfig encoder;
  LearnConfig learn;
  std::vector<int> eval_ks{1, 5, 10};
  ScaleInvariance si_mode = ScaleInvariance::linear;
  int sh_render_width = 256;

  void validate() const {
    require(crop.fov > 0.0 && crop.fov < 180.0, "crop.fov must be in (0, 180)");
    require(crop.size >= 1 && crop.size <= 8192, "crop.size must be in [1, 8192]");
    require(tonemap.key > 0.0, "tonemap.key must be positive");
    require(tonemap.gamma > 0.0, "tonemap.gamma must be positive");
    require(tonemap.i_max > 1.0, "tonemap.i_max must be > 1");
    require(lights.tau0 > 0.0, "lights.tau0 must be positive");
    require(lights.min_region_pixels >= 1, "lights.min_region_pixels must be >= 1");
    require(lights.connectivity == 4 || lights.connectivity == 8, "lights.connectivity must be 4 or 8");
    encoder.validate();
    learn.validate();
    require(!eval_ks.empty(), "eval.ks must not be empty");
    for (int k : eval_ks) require(k >= 1, "eval.ks entries must be >= 1");
    require(sh_render_width >= 2 && sh_render_width % 2 == 0, "eval.sh_render_width must be even and >= 2");
  }
};

namespace detail {

class SectionReader {
 public:
  SectionReader(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw InvalidArgument("config: section '" + name_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw InvalidArgument("config: bad type for " + name_ + "." + key);
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        throw InvalidArgument("config: unknown key " + name_ + "." + key);
  }

 private:
  const nlohmann::json& j_;
  std::string name_;
  std::vector<std::string> seen_;
};

}  // namespace detail

inline PipelineConfig parse_pipeline_config(const nlohmann::json& j) {
  PipelineConfig c;
  detail::SectionReader root(j, "config");
  auto section = [&](const char* name, auto&& body) {
    nlohmann::json empty = nlohmann::json::object();
    root.get(name, empty);
    detail::SectionReader r(empty, name);
    body(r);
    r.finish();
  };
  section("dataset", [&](detail::SectionReader& r) {
    r.get("input_dir", c.input_dir);
    r.get("output_dir", c.output_dir);
  });
  section("crop", [&](detail::SectionReader& r) {
    r.get("fov", c.crop.fov);
    r.get("size", c.crop.size);
  });
  section("tonemap", [&](detail::SectionReader& r) {
    r.get("key", c.tonemap.key);
    r.get("gamma", c.tonemap.gamma);
    r.get("i_max", c.tonemap.i_max);
  });
  section("lights", [&](detail::SectionReader& r) {
    r.get("tau0", c.lights.tau0);
    r.get("min_region_pixels", c.lights.min_region_pixels);
    r.get("connectivity", c.lights.connectivity);
  });
  section("encoder", [&](detail::SectionReader& r) {
    r.get("tokens", c.encoder.tokens);
    r.get("dim", c.encoder.dim);
    r.get("model_dim", c.encoder.model_dim);
    r.get("heads", c.encoder.heads);
    r.get("head_hidden", c.encoder.head_hidden);
    r.get("backbone_dim", c.encoder.backbone_dim);
    r.get("text_tokens", c.encoder.text_tokens);
    r.get("patch_grid", c.encoder.patch_grid);
    r.get("residual", c.encoder.residual);
    r.get("head_bias", c.encoder.head_bias);
  });
  section("learn", [&](detail::SectionReader& r) {
    r.get("temperature", c.learn.temperature);
    r.get("learn_temperature", c.learn.learn_temperature);
    r.get("learning_rate", c.learn.learning_rate);
    r.get("batch_size", c.learn.batch_size);
    r.get("steps", c.learn.steps);
    r.get("sh_loss_weight", c.learn.sh_loss_weight);
    r.get("sh_degree", c.learn.sh_degree);
    r.get("sh_all_modalities", c.learn.sh_all_modalities);
    r.get("log_dropout", c.learn.log_dropout);
    r.get("beta1", c.learn.beta1);
    r.get("beta2", c.learn.beta2);
    r.get("epsilon", c.learn.epsilon);
    r.get("cosine_decay", c.learn.cosine_decay);
    std::string pooling = c.learn.pooling == Pooling::mean ? "mean" : "flatten";
    r.get("pooling", pooling);
    if (pooling == "mean") c.learn.pooling = Pooling::mean;
    else if (pooling == "flatten") c.learn.pooling = Pooling::flatten;
    else throw InvalidArgument("config: learn.pooling must be flatten or mean");
  });
  section("eval", [&](detail::SectionReader& r) {
    r.get("ks", c.eval_ks);
    r.get("sh_render_width", c.sh_render_width);
    std::string si = c.si_mode == ScaleInvariance::log ? "log" : "linear";
    r.get("si_rmse", si);
    if (si == "log") c.si_mode = ScaleInvariance::log;
    else if (si == "linear") c.si_mode = ScaleInvariance::linear;
    else throw InvalidArgument("config: eval.si_rmse must be linear or log");
  });
  root.finish();
  c.validate();
  return c;
}

inline PipelineConfig load_pipeline_config(const fs::path& path) {
  const auto bytes = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return parse_pipeline_config(j);
}

}  // namespace unilight
