#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "topseg/corpus.hpp"
#include "topseg/layers.hpp"
#include "topseg/params.hpp"

namespace topseg {

enum class SentenceEncoderKind { trainable, external };

std::string to_string(SentenceEncoderKind kind);
SentenceEncoderKind parse_sentence_encoder(const std::string& text);

struct EncoderConfig {
  int vocab_size = 0;
  int embed_dim = 64;
  int hidden_dim = 256;
  SentenceEncoderKind sentence_encoder = SentenceEncoderKind::trainable;
  std::optional<int> external_dim;

  // Width of contextualized states (both directions).
  int state_dim() const { return 2 * hidden_dim; }
  // Width of a sentence vector fed to the contextualizer.
  int sentence_dim() const;
};

void validate_encoder_config(const EncoderConfig& cfg);

// Token to id map. Id 0 is reserved for unknown tokens.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();
  static Vocabulary build(const Corpus& corpus);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int id(const std::string& token) const;
  std::vector<int> encode(const Sentence& sentence) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct SentenceCache {
  std::vector<int> ids;
  BiLstmCache rnn;
  AttentionPoolCache pool;
};

struct EncoderCache {
  std::vector<SentenceCache> sentences;
  BiLstmCache context;
};

// Two hierarchical layers: attention-pooled token BiLSTM per sentence, then
// a BiLSTM across sentence vectors. In external mode the first layer is
// skipped and precomputed sentence vectors are consumed directly.
class Encoder {
 public:
  Encoder() = default;
  Encoder(ParamSet& params, const EncoderConfig& cfg);

  const EncoderConfig& config() const { return cfg_; }

  Vector encode_sentence(std::span<const int> ids,
                         SentenceCache* cache = nullptr) const;
  // Attention weights over tokens for a sentence; sums to 1.
  Vector attention_weights(std::span<const int> ids) const;

  Matrix contextualize(const Matrix& sentence_vectors,
                       BiLstmCache* cache = nullptr) const;

  // Sentence vectors for a tokenized document (trainable mode).
  Matrix encode_sentences(const std::vector<std::vector<int>>& doc_ids,
                          EncoderCache* cache) const;

  // Backprop from d H (n x state_dim) down to parameters. Returns the
  // gradient with respect to the sentence vectors.
  Matrix backward(const EncoderCache& cache, const Matrix& d_states) const;

 private:
  EncoderConfig cfg_;
  Embedding embedding_;
  BiLstm token_rnn_;
  AttentionPool pool_;
  BiLstm context_rnn_;
};

// Precomputed per-document sentence vectors, keyed by document id.
using ExternalVectors = std::map<std::string, Matrix>;

// Format: header "doc_id n d", then n rows of d floats; blocks repeat.
ExternalVectors read_external_vectors(std::istream& in,
                                      std::optional<int> expected_dim = {});
ExternalVectors load_external_vectors(const std::filesystem::path& path,
                                      std::optional<int> expected_dim = {});
void write_external_vectors(std::ostream& out, const ExternalVectors& vectors);
void save_external_vectors(const std::filesystem::path& path,
                           const ExternalVectors& vectors);

}  // namespace topseg
