#include "topseg/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "topseg/error.hpp"

namespace topseg {
namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void invalid(const Document& doc, const std::string& rule) {
  throw ValidationError("document '" + doc.id + "': " + rule);
}

std::mt19937_64 doc_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

int draw(std::mt19937_64& rng, IntRange r) {
  return std::uniform_int_distribution<int>(r.lo, r.hi)(rng);
}

}  // namespace

void validate_document(const Document& doc) {
  const std::size_t n = doc.sentences.size();
  if (n == 0) invalid(doc, "document must contain at least one sentence");
  if (doc.labels.size() != n) {
    invalid(doc, "labels length " + std::to_string(doc.labels.size()) +
                     " does not match sentence count " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (doc.sentences[i].empty()) {
      invalid(doc, "sentence " + std::to_string(i) + " has no tokens");
    }
    if (doc.labels[i] != 0 && doc.labels[i] != 1) {
      invalid(doc, "label " + std::to_string(i) + " must be 0 or 1");
    }
  }
  if (doc.labels.back() != 1) invalid(doc, "final label must be 1");
  for (const Edge& e : doc.edges) {
    if (e.head < 0 || e.head >= static_cast<int>(n) || e.dependent < 0 ||
        e.dependent >= static_cast<int>(n)) {
      invalid(doc, "edge (" + std::to_string(e.head) + "," +
                       std::to_string(e.dependent) + ") out of range");
    }
  }
}

void validate_corpus(const Corpus& corpus) {
  std::set<std::string> seen;
  for (const Document& doc : corpus.documents) {
    validate_document(doc);
    if (!seen.insert(doc.id).second) {
      throw ValidationError("duplicate document id '" + doc.id + "'");
    }
  }
}

void validate_synth_config(const SynthConfig& cfg) {
  auto check_range = [](IntRange r, const char* what) {
    if (r.lo < 1 || r.hi < r.lo) {
      throw ValidationError(std::string("synthetic config: ") + what +
                            " must be a nonempty range with positive bounds");
    }
  };
  if (cfg.num_docs < 0) {
    throw ValidationError("synthetic config: num_docs must be >= 0");
  }
  if (cfg.num_topics < 2) {
    throw ValidationError("synthetic config: num_topics must be >= 2");
  }
  if (cfg.vocab_size < cfg.num_topics) {
    throw ValidationError("synthetic config: vocab_size must be >= num_topics");
  }
  check_range(cfg.segments_per_doc, "segments_per_doc");
  check_range(cfg.sentences_per_segment, "sentences_per_segment");
  check_range(cfg.tokens_per_sentence, "tokens_per_sentence");
}

std::string to_json_line(const Document& doc) {
  ordered_json j;
  j["id"] = doc.id;
  j["sentences"] = doc.sentences;
  j["labels"] = doc.labels;
  if (doc.has_edges) {
    ordered_json edges = ordered_json::array();
    for (const Edge& e : doc.edges) edges.push_back({e.head, e.dependent});
    j["edges"] = std::move(edges);
  }
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

Document parse_json_line(const std::string& line, std::size_t line_number) {
  const std::string where = "line " + std::to_string(line_number);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(where + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) throw ParseError(where + ": expected a JSON object");

  Document doc;
  try {
    doc.id = j.at("id").get<std::string>();
    doc.sentences = j.at("sentences").get<std::vector<Sentence>>();
    doc.labels = j.at("labels").get<std::vector<int>>();
    if (auto it = j.find("edges"); it != j.end()) {
      doc.has_edges = true;
      for (const auto& pair : *it) {
        if (!pair.is_array() || pair.size() != 2) {
          throw ParseError(where + ": each edge must be a [head, dependent] pair");
        }
        doc.edges.push_back({pair[0].get<int>(), pair[1].get<int>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
  validate_document(doc);
  return doc;
}

Corpus load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Corpus corpus;
  corpus.name = path.stem().string();
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    corpus.documents.push_back(parse_json_line(line, line_number));
  }
  validate_corpus(corpus);
  return corpus;
}

void save_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const Document& doc : corpus.documents) {
    out << to_json_line(doc) << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

CorpusSplit split(const Corpus& corpus, const SplitRatios& ratios,
                  std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.dev <= 0 || ratios.test <= 0) {
    throw ValidationError("split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1");
  }
  const std::size_t n = corpus.documents.size();
  if (n < 3) {
    throw ValidationError("cannot split a corpus with fewer than 3 documents");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto floor_of = [n](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
  };
  const std::size_t n_dev = floor_of(ratios.dev);
  const std::size_t n_test = floor_of(ratios.test);
  const std::size_t n_train = n - n_dev - n_test;

  CorpusSplit out;
  out.train.name = corpus.name + "/train";
  out.dev.name = corpus.name + "/dev";
  out.test.name = corpus.name + "/test";
  for (std::size_t i = 0; i < n; ++i) {
    const Document& doc = corpus.documents[order[i]];
    if (i < n_train) {
      out.train.documents.push_back(doc);
    } else if (i < n_train + n_dev) {
      out.dev.documents.push_back(doc);
    } else {
      out.test.documents.push_back(doc);
    }
  }
  return out;
}

std::pair<int, int> topic_vocab_slice(const SynthConfig& cfg, int topic) {
  const long v = cfg.vocab_size;
  const long t = cfg.num_topics;
  return {static_cast<int>(topic * v / t), static_cast<int>((topic + 1) * v / t)};
}

Corpus generate_synthetic(const SynthConfig& cfg) {
  validate_synth_config(cfg);
  Corpus corpus;
  corpus.name = "synthetic";
  corpus.documents.reserve(cfg.num_docs);

  for (int d = 0; d < cfg.num_docs; ++d) {
    std::mt19937_64 rng = doc_rng(cfg.seed, static_cast<std::uint64_t>(d));
    Document doc;
    doc.id = "d" + std::to_string(d);
    doc.has_edges = true;

    const int num_segments = draw(rng, cfg.segments_per_doc);
    int topic = -1;
    for (int s = 0; s < num_segments; ++s) {
      if (topic < 0) {
        topic = std::uniform_int_distribution<int>(0, cfg.num_topics - 1)(rng);
      } else {
        // Uniform over the other topics.
        int next = std::uniform_int_distribution<int>(0, cfg.num_topics - 2)(rng);
        topic = next >= topic ? next + 1 : next;
      }
      const auto [first_word, last_word] = topic_vocab_slice(cfg, topic);
      std::uniform_int_distribution<int> word(first_word, last_word - 1);

      const int seg_first = static_cast<int>(doc.sentences.size());
      const int length = draw(rng, cfg.sentences_per_segment);
      for (int k = 0; k < length; ++k) {
        Sentence sentence(static_cast<std::size_t>(draw(rng, cfg.tokens_per_sentence)));
        for (auto& token : sentence) token = "w" + std::to_string(word(rng));
        doc.sentences.push_back(std::move(sentence));
        doc.labels.push_back(k + 1 == length ? 1 : 0);
        const int idx = static_cast<int>(doc.sentences.size()) - 1;
        if (k == 0) {
          if (s > 0) doc.edges.push_back({0, idx});
        } else {
          doc.edges.push_back({seg_first, idx});
        }
      }
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.num_docs = corpus.documents.size();
  std::size_t sentences = 0;
  std::size_t segments = 0;
  for (const Document& doc : corpus.documents) {
    sentences += doc.sentences.size();
    segments += static_cast<std::size_t>(
        std::count(doc.labels.begin(), doc.labels.end(), 1));
  }
  if (segments > 0) {
    stats.sentences_per_segment =
        static_cast<double>(sentences) / static_cast<double>(segments);
  }
  if (stats.num_docs > 0) {
    stats.segments_per_doc =
        static_cast<double>(segments) / static_cast<double>(stats.num_docs);
  }
  if (sentences > stats.num_docs) {
    stats.boundary_rate = static_cast<double>(segments - stats.num_docs) /
                          static_cast<double>(sentences - stats.num_docs);
  }
  return stats;
}

}  // namespace topseg
