#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace topseg {

using Sentence = std::vector<std::string>;

struct Edge {
  int head = 0;
  int dependent = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// A document as a sequence of tokenized sentences. labels[i] == 1 marks
// sentence i as the last sentence of a topic segment.
struct Document {
  std::string id;
  std::vector<Sentence> sentences;
  std::vector<int> labels;
  std::vector<Edge> edges;
  bool has_edges = false;

  std::size_t size() const { return sentences.size(); }

  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  std::string name;
  std::vector<Document> documents;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct IntRange {
  int lo = 1;
  int hi = 1;
};

struct SynthConfig {
  int num_docs = 100;
  int num_topics = 10;
  int vocab_size = 2000;
  IntRange segments_per_doc{3, 10};
  IntRange sentences_per_segment{3, 11};
  IntRange tokens_per_sentence{5, 20};
  std::uint64_t seed = 0;
};

// Throws ValidationError naming the document id and the broken rule.
void validate_document(const Document& doc);
void validate_corpus(const Corpus& corpus);
void validate_synth_config(const SynthConfig& cfg);

Corpus load_jsonl(const std::filesystem::path& path);
void save_jsonl(const Corpus& corpus, const std::filesystem::path& path);

// Single-line serialization used by save_jsonl; exposed for tests and the
// CLI hypothesis writer.
std::string to_json_line(const Document& doc);
Document parse_json_line(const std::string& line, std::size_t line_number);

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct CorpusSplit {
  Corpus train;
  Corpus dev;
  Corpus test;
};

// Seeded shuffle, then floor allocation of dev/test; the remainder goes to
// train.
CorpusSplit split(const Corpus& corpus, const SplitRatios& ratios,
                  std::uint64_t seed);

Corpus generate_synthetic(const SynthConfig& cfg);

// Vocabulary slice [first, last) owned by a topic in the synthetic generator.
std::pair<int, int> topic_vocab_slice(const SynthConfig& cfg, int topic);

struct CorpusStats {
  std::size_t num_docs = 0;
  double sentences_per_segment = 0.0;
  double segments_per_doc = 0.0;
  // Fraction of non-final sentences labelled as boundaries.
  double boundary_rate = 0.0;
};

CorpusStats corpus_stats(const Corpus& corpus);

}  // namespace topseg
