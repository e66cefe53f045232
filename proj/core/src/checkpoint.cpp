#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "topseg/config_json.hpp"
#include "topseg/error.hpp"
#include "topseg/segmenter.hpp"

namespace topseg {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'T', 'O', 'P', 'S', 'E', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

json config_json(const ModelConfig& cfg) {
  json enc = {
      {"vocab_size", cfg.encoder.vocab_size},
      {"embed_dim", cfg.encoder.embed_dim},
      {"hidden_dim", cfg.encoder.hidden_dim},
      {"sentence_encoder", to_string(cfg.encoder.sentence_encoder)},
      {"external_dim", cfg.encoder.external_dim ? json(*cfg.encoder.external_dim)
                                                : json(nullptr)},
  };
  json gat = {
      {"num_layers", cfg.gat.num_layers}, {"num_heads", cfg.gat.num_heads},
      {"dim", cfg.gat.dim},               {"leaky_slope", cfg.gat.leaky_slope},
      {"dropout", cfg.gat.dropout},
  };
  return {
      {"variant", to_string(cfg.variant)},
      {"encoder", enc},
      {"gat", gat},
      {"predictor_hidden", cfg.predictor_hidden},
      {"symmetrize", cfg.symmetrize},
      {"init_scale", cfg.init_scale},
  };
}

ModelConfig config_from(const json& j) {
  ModelConfig cfg;
  cfg.variant = parse_variant(j.at("variant").get<std::string>());
  const json& enc = j.at("encoder");
  cfg.encoder.vocab_size = enc.at("vocab_size").get<int>();
  cfg.encoder.embed_dim = enc.at("embed_dim").get<int>();
  cfg.encoder.hidden_dim = enc.at("hidden_dim").get<int>();
  cfg.encoder.sentence_encoder =
      parse_sentence_encoder(enc.at("sentence_encoder").get<std::string>());
  if (!enc.at("external_dim").is_null()) {
    cfg.encoder.external_dim = enc.at("external_dim").get<int>();
  }
  const json& gat = j.at("gat");
  cfg.gat.num_layers = gat.at("num_layers").get<int>();
  cfg.gat.num_heads = gat.at("num_heads").get<int>();
  cfg.gat.dim = gat.at("dim").get<int>();
  cfg.gat.leaky_slope = gat.at("leaky_slope").get<double>();
  cfg.gat.dropout = gat.at("dropout").get<double>();
  cfg.predictor_hidden = j.at("predictor_hidden").get<int>();
  cfg.symmetrize = j.at("symmetrize").get<bool>();
  cfg.init_scale = j.at("init_scale").get<double>();
  return cfg;
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

std::uint32_t crc_of(const char* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths.
  while (size > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
  return config_json(cfg).dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
}

std::string checkpoint_bytes(const SegmenterModel& model) {
  json header;
  header["format"] = "topseg-checkpoint";
  header["config"] = config_json(model.config());
  header["vocab"] = model.vocab().tokens();
  header["tau"] = model.tau() ? json(*model.tau()) : json(nullptr);
  json tensors = json::array();
  for (const auto& [name, p] : model.params()) {
    tensors.push_back({{"name", name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  header["tensors"] = std::move(tensors);
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  for (const auto& [name, p] : model.params()) {
    const std::size_t bytes = static_cast<std::size_t>(p.value.size()) * sizeof(double);
    out.append(reinterpret_cast<const char*>(p.value.data()), bytes);
  }
  put<std::uint32_t>(out, crc_of(out.data(), out.size()));
  return out;
}

SegmenterModel checkpoint_from_bytes(const std::string& bytes,
                                     std::optional<Variant> expected) {
  constexpr std::size_t kMinSize = sizeof(kMagic) + 4 + 8 + 4;
  if (bytes.size() < kMinSize) throw CheckpointError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a topseg checkpoint (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t body = bytes.size() - 4;
  std::size_t crc_pos = body;
  const auto stored_crc = take<std::uint32_t>(bytes, crc_pos);
  if (crc_of(bytes.data(), body) != stored_crc) {
    throw CheckpointError("checkpoint checksum mismatch (corrupt or truncated file)");
  }
  const auto header_len = take<std::uint64_t>(bytes, pos);
  if (pos + header_len > body) throw CheckpointError("checkpoint truncated");
  json header;
  try {
    header = json::parse(bytes.substr(pos, header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  }
  pos += header_len;

  ModelConfig cfg;
  std::vector<std::string> tokens;
  try {
    cfg = config_from(header.at("config"));
    tokens = header.at("vocab").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  }
  if (expected && *expected != cfg.variant) {
    throw CheckpointError("checkpoint holds a " + to_string(cfg.variant) +
                          " model; " + to_string(*expected) + " inference requested");
  }
  if (tokens.empty() || tokens.front() != Vocabulary::kUnkToken) {
    throw CheckpointError("checkpoint vocabulary is malformed");
  }
  tokens.erase(tokens.begin());
  SegmenterModel model(cfg, Vocabulary::from_tokens(std::move(tokens)), 0);

  const json& table = header.at("tensors");
  if (table.size() != model.params().tensor_count()) {
    throw CheckpointError("checkpoint tensor table does not match the model");
  }
  std::size_t idx = 0;
  for (auto& [name, p] : model.params()) {
    const json& entry = table.at(idx++);
    if (entry.at("name").get<std::string>() != name ||
        entry.at("rows").get<Eigen::Index>() != p.value.rows() ||
        entry.at("cols").get<Eigen::Index>() != p.value.cols()) {
      throw CheckpointError("checkpoint tensor '" + name + "' does not match the model");
    }
    const std::size_t n = static_cast<std::size_t>(p.value.size()) * sizeof(double);
    if (pos + n > body) throw CheckpointError("checkpoint truncated");
    std::memcpy(p.value.data(), bytes.data() + pos, n);
    pos += n;
  }
  if (pos != body) throw CheckpointError("checkpoint has trailing bytes");
  if (!header.at("tau").is_null()) model.set_tau(header.at("tau").get<double>());
  return model;
}

void save_checkpoint(const SegmenterModel& model, const std::filesystem::path& path) {
  const std::string bytes = checkpoint_bytes(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

SegmenterModel load_checkpoint(const std::filesystem::path& path,
                               std::optional<Variant> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_bytes(buf.str(), expected);
}

}  // namespace topseg
