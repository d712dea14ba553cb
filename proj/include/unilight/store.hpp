#pragma once

// Binary persistence: embedding stores and parameter checkpoints.
// Byte layouts are documented in docs/formats.md.

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unilight/codecs.hpp"
#include "unilight/encoder.hpp"
#include "unilight/error.hpp"
#include "unilight/learn.hpp"

namespace unilight {

constexpr char kStoreMagic[6] = {'U', 'L', 'E', 'M', 'B', '\0'};
constexpr std::uint32_t kStoreVersion = 1;
constexpr std::size_t kStoreHeaderSize = 40;

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

// All embeddings must share one modality and shape.
inline std::string encode_embedding_store(const std::vector<Embedding>& embeddings, int tokens, int dim,
                                          Modality modality) {
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& e : embeddings) {
    if (e.tokens.rows() != tokens || e.tokens.cols() != dim) throw InvalidArgument("embedding store: shape mismatch");
    if (e.modality != modality) throw InvalidArgument("embedding store: mixed modalities");
    ids.push_back(e.id);
  }
  const std::uint64_t body = static_cast<std::uint64_t>(embeddings.size()) * tokens * dim * 4;
  std::string out(kStoreMagic, sizeof kStoreMagic);
  out.append(2, '\0');
  detail::put_u32_le(out, kStoreVersion);
  detail::put_u32_le(out, static_cast<std::uint32_t>(embeddings.size()));
  detail::put_u32_le(out, static_cast<std::uint32_t>(tokens));
  detail::put_u32_le(out, static_cast<std::uint32_t>(dim));
  detail::put_u32_le(out, static_cast<std::uint32_t>(modality));
  detail::put_u32_le(out, 0);
  detail::put_u64_le(out, kStoreHeaderSize + body);
  for (const auto& e : embeddings)
    for (Eigen::Index i = 0; i < e.tokens.size(); ++i) detail::put_u32_le(out, detail::float_bits(e.tokens.data()[i]));
  out += nlohmann::json{{"ids", ids}}.dump();
  return out;
}

struct EmbeddingStore {
  int tokens = 0;
  int dim = 0;
  Modality modality = Modality::image;
  std::vector<Embedding> embeddings;
};

inline EmbeddingStore decode_embedding_store(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kStoreHeaderSize || std::memcmp(bytes.data(), kStoreMagic, sizeof kStoreMagic) != 0)
    throw FormatError("not an embedding store (bad magic)");
  const std::uint8_t* p = bytes.data();
  if (detail::get_u32_le(p + 8) != kStoreVersion) throw FormatError("unsupported embedding store version");
  const std::uint32_t count = detail::get_u32_le(p + 12);
  EmbeddingStore store;
  store.tokens = static_cast<int>(detail::get_u32_le(p + 16));
  store.dim = static_cast<int>(detail::get_u32_le(p + 20));
  const std::uint32_t tag = detail::get_u32_le(p + 24);
  if (tag >= kModalityCount) throw FormatError("embedding store: unknown modality tag");
  store.modality = static_cast<Modality>(tag);
  const std::uint64_t manifest = detail::get_u64_le(p + 32);
  const std::uint64_t body = static_cast<std::uint64_t>(count) * store.tokens * store.dim * 4;
  if (manifest != kStoreHeaderSize + body || manifest > bytes.size())
    throw CorruptFile("embedding store body length does not match header", std::min<std::uint64_t>(manifest, bytes.size()));
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(manifest), bytes.end());
  } catch (const nlohmann::json::exception&) {
    throw CorruptFile("embedding store id manifest is not valid JSON", manifest);
  }
  const auto& ids = doc.at("ids");
  if (ids.size() != count) throw CorruptFile("embedding store id count does not match header", manifest);
  const std::uint8_t* q = p + kStoreHeaderSize;
  store.embeddings.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    Embedding e{Mat<float>(store.tokens, store.dim), store.modality, ids[k].get<std::string>()};
    for (Eigen::Index i = 0; i < e.tokens.size(); ++i, q += 4) e.tokens.data()[i] = std::bit_cast<float>(detail::get_u32_le(q));
    store.embeddings.push_back(std::move(e));
  }
  return store;
}

inline void write_embedding_store(const fs::path& path, const EmbeddingStore& store) {
  atomic_write(path, encode_embedding_store(store.embeddings, store.tokens, store.dim, store.modality));
}

inline EmbeddingStore read_embedding_store(const fs::path& path) { return decode_embedding_store(read_file(path)); }

// ---------------------------------------------------------------------------
// Checkpoints: "ULCKPT\n<header bytes>\n<JSON header>" then float32 LE tensors
// in header order.

inline nlohmann::json encoder_config_json(const EncoderConfig& c) {
  return {{"tokens", c.tokens},       {"dim", c.dim},
          {"model_dim", c.model_dim}, {"heads", c.heads},
          {"head_hidden", c.head_hidden}, {"backbone_dim", c.backbone_dim},
          {"text_tokens", c.text_tokens}, {"patch_grid", c.patch_grid},
          {"residual", c.residual},   {"head_bias", c.head_bias},
          {"shared_head", c.shared_head}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.tokens = j.at("tokens");
  c.dim = j.at("dim");
  c.model_dim = j.at("model_dim");
  c.heads = j.at("heads");
  c.head_hidden = j.at("head_hidden");
  c.backbone_dim = j.at("backbone_dim");
  c.text_tokens = j.at("text_tokens");
  c.patch_grid = j.at("patch_grid");
  c.residual = j.at("residual");
  c.head_bias = j.at("head_bias");
  c.shared_head = j.at("shared_head");
  c.validate();
  return c;
}

struct Checkpoint {
  ModelParams<float> params;
  std::uint64_t backbone_seed = 0;
  int envmap_width = 128;  // payload resolution the model was trained on
};

inline std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["encoder"] = encoder_config_json(ckpt.params.encoder.config);
  header["backbone_seed"] = ckpt.backbone_seed;
  header["envmap_width"] = ckpt.envmap_width;
  header["tensors"] = nlohmann::json::array();
  std::string body;
  ModelParams<float>::visit(ckpt.params, [&](const std::string& name, const Mat<float>& t) {
    header["tensors"].push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}});
    for (Eigen::Index i = 0; i < t.size(); ++i) detail::put_u32_le(body, detail::float_bits(t.data()[i]));
  });
  const std::string text = header.dump();
  return "ULCKPT\n" + std::to_string(text.size()) + "\n" + text + body;
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  detail::HeaderReader r{bytes};
  if (r.line() != "ULCKPT") throw FormatError("not a checkpoint (bad magic)");
  std::size_t length = 0;
  try {
    length = std::stoull(r.line());
  } catch (const std::logic_error&) {
    throw CorruptFile("malformed checkpoint header length", r.pos);
  }
  if (r.pos + length > bytes.size()) throw CorruptFile("truncated checkpoint header", bytes.size());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(r.pos + length));
  } catch (const nlohmann::json::exception&) {
    throw CorruptFile("checkpoint header is not valid JSON", r.pos);
  }
  std::size_t pos = r.pos + length;
  Checkpoint ckpt;
  ckpt.backbone_seed = header.value("backbone_seed", std::uint64_t{0});
  ckpt.envmap_width = header.value("envmap_width", 128);
  const EncoderConfig config = encoder_config_from_json(header.at("encoder"));
  ckpt.params = init_model<float>(config, LearnConfig{}, 0);
  const auto& tensors = header.at("tensors");
  std::size_t k = 0;
  ModelParams<float>::visit(ckpt.params, [&](const std::string& name, Mat<float>& t) {
    if (k >= tensors.size() || tensors[k].at("name") != name) throw FormatError("checkpoint tensor list mismatch at " + name);
    const auto rows = tensors[k].at("shape")[0].get<Eigen::Index>();
    const auto cols = tensors[k].at("shape")[1].get<Eigen::Index>();
    if (rows != t.rows() || cols != t.cols()) throw FormatError("checkpoint tensor shape mismatch for " + name);
    const std::size_t need = static_cast<std::size_t>(t.size()) * 4;
    if (pos + need > bytes.size()) throw CorruptFile("truncated checkpoint tensor " + name, pos);
    for (Eigen::Index i = 0; i < t.size(); ++i, pos += 4) t.data()[i] = std::bit_cast<float>(detail::get_u32_le(bytes.data() + pos));
    ++k;
  });
  if (k != tensors.size()) throw FormatError("checkpoint has extra tensors");
  return ckpt;
}

inline void write_checkpoint(const fs::path& path, const Checkpoint& ckpt) { atomic_write(path, encode_checkpoint(ckpt)); }
inline Checkpoint read_checkpoint(const fs::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace unilight
