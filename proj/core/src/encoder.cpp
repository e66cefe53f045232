#include "topseg/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "topseg/error.hpp"

namespace topseg {

std::string to_string(SentenceEncoderKind kind) {
  return kind == SentenceEncoderKind::trainable ? "trainable" : "external";
}

SentenceEncoderKind parse_sentence_encoder(const std::string& text) {
  if (text == "trainable") return SentenceEncoderKind::trainable;
  if (text == "external") return SentenceEncoderKind::external;
  throw ValidationError("unknown sentence encoder '" + text + "'");
}

int EncoderConfig::sentence_dim() const {
  return sentence_encoder == SentenceEncoderKind::external ? external_dim.value_or(0)
                                                          : 2 * hidden_dim;
}

void validate_encoder_config(const EncoderConfig& cfg) {
  if (cfg.hidden_dim <= 0) throw ValidationError("encoder: hidden_dim must be positive");
  if (cfg.sentence_encoder == SentenceEncoderKind::external) {
    if (!cfg.external_dim || *cfg.external_dim <= 0) {
      throw ValidationError("encoder: external mode needs a positive external_dim");
    }
  } else {
    if (cfg.external_dim) {
      throw ValidationError("encoder: external_dim is only valid in external mode");
    }
    if (cfg.embed_dim <= 0) throw ValidationError("encoder: embed_dim must be positive");
    if (cfg.vocab_size <= 0) throw ValidationError("encoder: vocab_size must be positive");
  }
}

Vocabulary::Vocabulary() {
  tokens_.push_back(kUnkToken);
  index_.emplace(kUnkToken, kUnk);
}

Vocabulary Vocabulary::build(const Corpus& corpus) {
  std::set<std::string> seen;
  for (const Document& doc : corpus.documents) {
    for (const Sentence& s : doc.sentences) seen.insert(s.begin(), s.end());
  }
  seen.erase(kUnkToken);
  return from_tokens({seen.begin(), seen.end()});
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  for (auto& t : tokens) {
    if (t == kUnkToken) continue;
    auto [it, inserted] = v.index_.emplace(t, v.size());
    if (!inserted) throw ValidationError("duplicate vocabulary token '" + t + "'");
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const Sentence& sentence) const {
  std::vector<int> ids;
  ids.reserve(sentence.size());
  for (const auto& tok : sentence) ids.push_back(id(tok));
  return ids;
}

Encoder::Encoder(ParamSet& params, const EncoderConfig& cfg) : cfg_(cfg) {
  validate_encoder_config(cfg);
  const int state = cfg.state_dim();
  if (cfg.sentence_encoder == SentenceEncoderKind::trainable) {
    embedding_ = Embedding(params, "encoder.embedding", cfg.vocab_size, cfg.embed_dim);
    token_rnn_ = BiLstm(params, "encoder.token_rnn", cfg.embed_dim, cfg.hidden_dim);
    pool_ = AttentionPool(params, "encoder.pool", state, state);
  }
  context_rnn_ = BiLstm(params, "encoder.context_rnn", cfg.sentence_dim(), cfg.hidden_dim);
}

Vector Encoder::encode_sentence(std::span<const int> ids,
                                SentenceCache* cache) const {
  if (cfg_.sentence_encoder != SentenceEncoderKind::trainable) {
    throw Error("encode_sentence requires the trainable sentence encoder");
  }
  if (ids.empty()) throw ValidationError("cannot encode an empty sentence");
  for (int id : ids) {
    if (id < 0 || id >= cfg_.vocab_size) {
      throw ValidationError("token id " + std::to_string(id) + " outside vocabulary");
    }
  }
  const Matrix emb = embedding_.forward(ids);
  if (!cache) {
    return pool_.forward(token_rnn_.forward(emb, nullptr), nullptr);
  }
  cache->ids.assign(ids.begin(), ids.end());
  const Matrix states = token_rnn_.forward(emb, &cache->rnn);
  return pool_.forward(states, &cache->pool);
}

Vector Encoder::attention_weights(std::span<const int> ids) const {
  SentenceCache cache;
  encode_sentence(ids, &cache);
  return cache.pool.weights;
}

Matrix Encoder::contextualize(const Matrix& sentence_vectors,
                              BiLstmCache* cache) const {
  if (sentence_vectors.rows() < 1) {
    throw ValidationError("contextualize needs at least one sentence");
  }
  if (sentence_vectors.cols() != cfg_.sentence_dim()) {
    throw ValidationError("sentence vector width " +
                          std::to_string(sentence_vectors.cols()) + " != " +
                          std::to_string(cfg_.sentence_dim()));
  }
  return context_rnn_.forward(sentence_vectors, cache);
}

Matrix Encoder::encode_sentences(const std::vector<std::vector<int>>& doc_ids,
                                 EncoderCache* cache) const {
  Matrix out(static_cast<Eigen::Index>(doc_ids.size()), cfg_.state_dim());
  if (cache) cache->sentences.resize(doc_ids.size());
  for (std::size_t s = 0; s < doc_ids.size(); ++s) {
    out.row(static_cast<Eigen::Index>(s)) =
        encode_sentence(doc_ids[s], cache ? &cache->sentences[s] : nullptr).transpose();
  }
  return out;
}

Matrix Encoder::backward(const EncoderCache& cache, const Matrix& d_states) const {
  Matrix d_vectors = context_rnn_.backward(cache.context, d_states);
  if (cfg_.sentence_encoder == SentenceEncoderKind::trainable) {
    for (std::size_t s = 0; s < cache.sentences.size(); ++s) {
      const SentenceCache& sc = cache.sentences[s];
      const Matrix d_tok = pool_.backward(
          sc.pool, d_vectors.row(static_cast<Eigen::Index>(s)).transpose());
      embedding_.backward(sc.ids, token_rnn_.backward(sc.rnn, d_tok));
    }
  }
  return d_vectors;
}

ExternalVectors read_external_vectors(std::istream& in,
                                      std::optional<int> expected_dim) {
  ExternalVectors out;
  std::string line;
  std::size_t line_number = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_number;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  while (next_line()) {
    std::istringstream header(line);
    std::string id;
    long n = 0;
    long d = 0;
    if (!(header >> id >> n >> d) || n < 1 || d < 1) {
      throw ParseError("external vectors line " + std::to_string(line_number) +
                       ": expected header 'doc_id n d'");
    }
    if (expected_dim && d != *expected_dim) {
      throw ValidationError("external vectors for '" + id + "' have dimension " +
                            std::to_string(d) + ", expected " +
                            std::to_string(*expected_dim));
    }
    Matrix m(n, d);
    for (long r = 0; r < n; ++r) {
      if (!next_line()) {
        throw ParseError("external vectors for '" + id + "': missing rows");
      }
      std::istringstream row(line);
      for (long c = 0; c < d; ++c) {
        if (!(row >> m(r, c))) {
          throw ParseError("external vectors line " + std::to_string(line_number) +
                           ": expected " + std::to_string(d) + " values");
        }
      }
      std::string extra;
      if (row >> extra) {
        throw ParseError("external vectors line " + std::to_string(line_number) +
                         ": too many values");
      }
    }
    if (!out.emplace(id, std::move(m)).second) {
      throw ParseError("external vectors: duplicate document '" + id + "'");
    }
  }
  return out;
}

ExternalVectors load_external_vectors(const std::filesystem::path& path,
                                      std::optional<int> expected_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_external_vectors(in, expected_dim);
}

void write_external_vectors(std::ostream& out, const ExternalVectors& vectors) {
  out << std::setprecision(17);
  for (const auto& [id, m] : vectors) {
    out << id << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out << ' ';
        out << m(r, c);
      }
      out << '\n';
    }
  }
}

void save_external_vectors(const std::filesystem::path& path,
                           const ExternalVectors& vectors) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_external_vectors(out, vectors);
}

}  // namespace topseg
