#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "topseg/error.hpp"

namespace topseg::cli {
namespace {

using nlohmann::ordered_json;

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ValidationError("setting '" + key + "': expected " + expected + ", got '" + value + "'");
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

int parse_int32(const std::string& key, const std::string& v) {
  const long long x = parse_int(key, v);
  if (x < INT32_MIN || x > INT32_MAX) bad_value(key, v, "a 32-bit integer");
  return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  double out = 0.0;
  in >> out;
  if (v.empty() || !in || !in.eof()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

IntRange parse_range(const std::string& key, const std::string& v) {
  const auto comma = v.find(',');
  if (comma == std::string::npos) {
    const int x = parse_int32(key, v);
    return {x, x};
  }
  return {parse_int32(key, v.substr(0, comma)), parse_int32(key, v.substr(comma + 1))};
}

std::optional<fs::path> parse_path(const std::string& v) {
  if (v.empty()) return std::nullopt;
  return fs::path(v);
}

std::string to_string(BenchVariants v) {
  switch (v) {
    case BenchVariants::basic: return "basic";
    case BenchVariants::discourse: return "discourse";
    case BenchVariants::both: return "both";
  }
  return "both";
}

ordered_json path_json(const std::optional<fs::path>& p) {
  return p ? ordered_json(p->string()) : ordered_json(nullptr);
}

ordered_json range_json(const IntRange& r) { return ordered_json::array({r.lo, r.hi}); }

struct Setting {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<ordered_json(const RunConfig&)> get;
};

// Accessors are generic lambdas so one definition serves both the setter
// and the const getter.
template <class Field>
Setting int_field(Field field) {
  return {[field](RunConfig& c, const std::string& k, const std::string& v) {
            field(c) = parse_int32(k, v);
          },
          [field](const RunConfig& c) { return ordered_json(field(c)); }};
}

template <class Field>
Setting double_field(Field field) {
  return {[field](RunConfig& c, const std::string& k, const std::string& v) {
            field(c) = parse_double(k, v);
          },
          [field](const RunConfig& c) { return ordered_json(field(c)); }};
}

template <class Field>
Setting range_field(Field field) {
  return {[field](RunConfig& c, const std::string& k, const std::string& v) {
            field(c) = parse_range(k, v);
          },
          [field](const RunConfig& c) { return range_json(field(c)); }};
}

template <class Field>
Setting path_field(Field field) {
  return {[field](RunConfig& c, const std::string&, const std::string& v) {
            field(c) = parse_path(v);
          },
          [field](const RunConfig& c) { return path_json(field(c)); }};
}

const std::vector<std::pair<std::string, Setting>>& settings() {
  static const std::vector<std::pair<std::string, Setting>> table = {
      {"seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); },
        [](const RunConfig& c) { return ordered_json(c.seed); }}},
      {"variant",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.model.variant = parse_variant(v);
        },
        [](const RunConfig& c) { return ordered_json(topseg::to_string(c.model.variant)); }}},
      {"synth.num_docs", int_field([](auto& c) -> auto& { return c.synth.num_docs; })},
      {"synth.num_topics", int_field([](auto& c) -> auto& { return c.synth.num_topics; })},
      {"synth.vocab_size", int_field([](auto& c) -> auto& { return c.synth.vocab_size; })},
      {"synth.segments_per_doc", range_field([](auto& c) -> auto& { return c.synth.segments_per_doc; })},
      {"synth.sentences_per_segment", range_field([](auto& c) -> auto& { return c.synth.sentences_per_segment; })},
      {"synth.tokens_per_sentence", range_field([](auto& c) -> auto& { return c.synth.tokens_per_sentence; })},
      {"synth.split",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.write_split = parse_bool(k, v);
        },
        [](const RunConfig& c) { return ordered_json(c.write_split); }}},
      {"split.train", double_field([](auto& c) -> auto& { return c.split.train; })},
      {"split.dev", double_field([](auto& c) -> auto& { return c.split.dev; })},
      {"split.test", double_field([](auto& c) -> auto& { return c.split.test; })},
      {"model.embed_dim", int_field([](auto& c) -> auto& { return c.model.encoder.embed_dim; })},
      {"model.hidden_dim", int_field([](auto& c) -> auto& { return c.model.encoder.hidden_dim; })},
      {"model.sentence_encoder",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.model.encoder.sentence_encoder = parse_sentence_encoder(v);
        },
        [](const RunConfig& c) {
          return ordered_json(topseg::to_string(c.model.encoder.sentence_encoder));
        }}},
      {"model.external_dim",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v.empty()) c.model.encoder.external_dim.reset();
          else c.model.encoder.external_dim = parse_int32(k, v);
        },
        [](const RunConfig& c) {
          return c.model.encoder.external_dim ? ordered_json(*c.model.encoder.external_dim)
                                              : ordered_json(nullptr);
        }}},
      {"model.predictor_hidden", int_field([](auto& c) -> auto& { return c.model.predictor_hidden; })},
      {"model.symmetrize",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.model.symmetrize = parse_bool(k, v);
        },
        [](const RunConfig& c) { return ordered_json(c.model.symmetrize); }}},
      {"model.init_scale", double_field([](auto& c) -> auto& { return c.model.init_scale; })},
      {"gat.num_layers", int_field([](auto& c) -> auto& { return c.model.gat.num_layers; })},
      {"gat.num_heads", int_field([](auto& c) -> auto& { return c.model.gat.num_heads; })},
      {"gat.dim", int_field([](auto& c) -> auto& { return c.model.gat.dim; })},
      {"gat.leaky_slope", double_field([](auto& c) -> auto& { return c.model.gat.leaky_slope; })},
      {"gat.dropout", double_field([](auto& c) -> auto& { return c.model.gat.dropout; })},
      {"train.lr", double_field([](auto& c) -> auto& { return c.train.lr; })},
      {"train.batch_size", int_field([](auto& c) -> auto& { return c.train.batch_size; })},
      {"train.max_epochs", int_field([](auto& c) -> auto& { return c.train.max_epochs; })},
      {"train.patience", int_field([](auto& c) -> auto& { return c.train.patience; })},
      {"train.clip_norm", double_field([](auto& c) -> auto& { return c.train.clip_norm; })},
      {"graph.flip_rate", double_field([](auto& c) -> auto& { return c.flip_rate; })},
      {"eval.k_policy",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.k_policy = parse_k_policy(v);
        },
        [](const RunConfig& c) { return ordered_json(topseg::to_string(c.k_policy)); }}},
      {"bench.warmup", int_field([](auto& c) -> auto& { return c.bench.warmup; })},
      {"bench.reps", int_field([](auto& c) -> auto& { return c.bench.reps; })},
      {"bench.batch_size", int_field([](auto& c) -> auto& { return c.bench.batch_size; })},
      {"bench.variants",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "basic") c.bench_variants = BenchVariants::basic;
          else if (v == "discourse") c.bench_variants = BenchVariants::discourse;
          else if (v == "both") c.bench_variants = BenchVariants::both;
          else bad_value(k, v, "basic, discourse or both");
        },
        [](const RunConfig& c) { return ordered_json(to_string(c.bench_variants)); }}},
      {"paths.out", path_field([](auto& c) -> auto& { return c.out; })},
      {"paths.train", path_field([](auto& c) -> auto& { return c.train_path; })},
      {"paths.dev", path_field([](auto& c) -> auto& { return c.dev_path; })},
      {"paths.data", path_field([](auto& c) -> auto& { return c.data_path; })},
      {"paths.hyp", path_field([](auto& c) -> auto& { return c.hyp_path; })},
      {"paths.model", path_field([](auto& c) -> auto& { return c.model_path; })},
      {"paths.vectors", path_field([](auto& c) -> auto& { return c.vectors_path; })},
      {"paths.targets",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.targets.clear();
          std::stringstream in(v);
          std::string item;
          while (std::getline(in, item, ',')) {
            if (!item.empty()) c.targets.emplace_back(item);
          }
        },
        [](const RunConfig& c) {
          ordered_json arr = ordered_json::array();
          for (const auto& t : c.targets) arr.push_back(t.string());
          return arr;
        }}},
  };
  return table;
}


std::string json_value_text(const std::string& key, const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += json_value_text(key, v[i]);
    }
    return out;
  }
  throw ValidationError("config key '" + key + "' has an unsupported value");
}

}  // namespace

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, s] : settings()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, s] : settings()) {
    if (name == key) {
      s.set(cfg, key, value);
      return;
    }
  }
  throw ValidationError("unknown setting '" + key + "'");
}

void apply_config_file(RunConfig& cfg, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config file " + path.string() + " does not exist");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config file " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError("config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "command") {
      if (value.is_string() && value.get<std::string>() != cfg.command) {
        throw ValidationError("config file was written for '" + value.get<std::string>() +
                              "', not '" + cfg.command + "'");
      }
      continue;
    }
    apply_setting(cfg, key, json_value_text(key, value));
  }
}

nlohmann::ordered_json run_config_json(const RunConfig& cfg) {
  ordered_json j;
  j["command"] = cfg.command;
  for (const auto& [name, s] : settings()) j[name] = s.get(cfg);
  return j;
}

}  // namespace topseg::cli
