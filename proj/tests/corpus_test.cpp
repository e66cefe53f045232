#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "topseg/corpus.hpp"
#include "topseg/error.hpp"

namespace topseg {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("topseg_corpus_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(LoadJsonl, MinimalDocument) {
  TempDir dir;
  write_file(dir / "c.jsonl", R"({"id":"d0","sentences":[["a"]],"labels":[1]})" "\n");
  const Corpus c = load_jsonl(dir / "c.jsonl");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.documents[0].id, "d0");
  EXPECT_EQ(c.documents[0].size(), 1u);
  EXPECT_FALSE(c.documents[0].has_edges);
}

TEST(LoadJsonl, FinalLabelMustBeOne) {
  TempDir dir;
  write_file(dir / "c.jsonl", R"({"id":"d0","sentences":[["a"]],"labels":[0]})" "\n");
  try {
    load_jsonl(dir / "c.jsonl");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("final label must be 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("d0"), std::string::npos);
  }
}

TEST(LoadJsonl, MalformedLineNamesLineNumber) {
  TempDir dir;
  write_file(dir / "c.jsonl",
             R"({"id":"d0","sentences":[["a"]],"labels":[1]})" "\n" R"({"id":"d1",)" "\n");
  try {
    load_jsonl(dir / "c.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(LoadJsonl, ValidationRules) {
  auto bad = [](const std::string& line) {
    EXPECT_THROW(parse_json_line(line, 1), ValidationError) << line;
  };
  bad(R"({"id":"x","sentences":[["a"],["b"]],"labels":[1]})");
  bad(R"({"id":"x","sentences":[["a"],[]],"labels":[0,1]})");
  bad(R"({"id":"x","sentences":[],"labels":[]})");
  bad(R"({"id":"x","sentences":[["a"]],"labels":[2]})");
  bad(R"({"id":"x","sentences":[["a"],["b"]],"labels":[0,1],"edges":[[0,2]]})");
  EXPECT_THROW(parse_json_line(R"({"id":"x","labels":[1]})", 1), ParseError);
}

TEST(LoadJsonl, DuplicateIdsRejected) {
  TempDir dir;
  write_file(dir / "c.jsonl", R"({"id":"d0","sentences":[["a"]],"labels":[1]})" "\n"
                              R"({"id":"d0","sentences":[["b"]],"labels":[1]})" "\n");
  EXPECT_THROW(load_jsonl(dir / "c.jsonl"), ValidationError);
}

TEST(SaveJsonl, EmptyCorpusGivesEmptyFile) {
  TempDir dir;
  save_jsonl(Corpus{}, dir / "e.jsonl");
  EXPECT_TRUE(read_file(dir / "e.jsonl").empty());
}

TEST(SaveJsonl, FixedKeyOrderOneLinePerDocument) {
  TempDir dir;
  Corpus c;
  c.documents.push_back({"d0", {{"a", "b"}, {"c"}}, {0, 1}, {{0, 1}}, true});
  save_jsonl(c, dir / "one.jsonl");
  EXPECT_EQ(read_file(dir / "one.jsonl"),
            R"({"id":"d0","sentences":[["a","b"],["c"]],"labels":[0,1],"edges":[[0,1]]})" "\n");
}

TEST(SaveJsonl, Utf8PassesThrough) {
  Document d{"d\xC3\xA9", {{"caf\xC3\xA9"}}, {1}, {}, false};
  const std::string line = to_json_line(d);
  EXPECT_NE(line.find("caf\xC3\xA9"), std::string::npos);
  EXPECT_EQ(parse_json_line(line, 1), d);
}

TEST(SaveJsonl, RoundTripAndByteStability) {
  TempDir dir;
  SynthConfig cfg;
  cfg.num_docs = 50;
  cfg.seed = 3;
  const Corpus c = generate_synthetic(cfg);
  save_jsonl(c, dir / "a.jsonl");
  save_jsonl(c, dir / "b.jsonl");
  EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
  const Corpus back = load_jsonl(dir / "a.jsonl");
  EXPECT_EQ(back.documents, c.documents);
}

TEST(Split, ExactDivision) {
  SynthConfig cfg;
  cfg.num_docs = 10;
  const auto parts = split(generate_synthetic(cfg), {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(parts.train.size(), 8u);
  EXPECT_EQ(parts.dev.size(), 1u);
  EXPECT_EQ(parts.test.size(), 1u);
}

TEST(Split, FloorRuleWithRemainderToTrain) {
  Corpus c;
  for (int i = 0; i < 921; ++i) c.documents.push_back({"d" + std::to_string(i), {{"x"}}, {1}, {}, false});
  const auto parts = split(c, {0.8, 0.1, 0.1}, 1);
  EXPECT_EQ(parts.train.size(), 737u);
  EXPECT_EQ(parts.dev.size(), 92u);
  EXPECT_EQ(parts.test.size(), 92u);
}

TEST(Split, PartitionIsDisjointExhaustiveAndSeeded) {
  SynthConfig cfg;
  cfg.num_docs = 37;
  const Corpus c = generate_synthetic(cfg);
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const auto a = split(c, {0.7, 0.1, 0.2}, seed);
    const auto b = split(c, {0.7, 0.1, 0.2}, seed);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.dev, b.dev);
    EXPECT_EQ(a.test, b.test);
    std::multiset<std::string> ids;
    for (const Corpus* part : {&a.train, &a.dev, &a.test})
      for (const auto& d : part->documents) ids.insert(d.id);
    EXPECT_EQ(ids.size(), c.size());
    EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), c.size());
  }
  EXPECT_NE(split(c, {0.7, 0.1, 0.2}, 0).test, split(c, {0.7, 0.1, 0.2}, 1).test);
}

TEST(Split, Errors) {
  Corpus two;
  two.documents = {{"a", {{"x"}}, {1}, {}, false}, {"b", {{"x"}}, {1}, {}, false}};
  EXPECT_THROW(split(two, {0.8, 0.1, 0.1}, 0), ValidationError);
  SynthConfig cfg;
  cfg.num_docs = 5;
  const Corpus c = generate_synthetic(cfg);
  EXPECT_THROW(split(c, {0.8, 0.1, 0.2}, 0), ValidationError);
  EXPECT_THROW(split(c, {1.0, 0.0, 0.0}, 0), ValidationError);
}

TEST(Synthetic, EmptyCorpus) {
  SynthConfig cfg;
  cfg.num_docs = 0;
  EXPECT_TRUE(generate_synthetic(cfg).empty());
}

TEST(Synthetic, FixedShape) {
  SynthConfig cfg;
  cfg.num_docs = 20;
  cfg.segments_per_doc = {3, 3};
  cfg.sentences_per_segment = {4, 4};
  for (const auto& d : generate_synthetic(cfg).documents) {
    EXPECT_EQ(d.size(), 12u);
    EXPECT_EQ(std::count(d.labels.begin(), d.labels.end(), 1), 3);
  }
}

TEST(Synthetic, AdjacentSegmentsShareNoVocabulary) {
  SynthConfig cfg;
  cfg.num_docs = 40;
  cfg.num_topics = 5;
  cfg.vocab_size = 500;
  for (const auto& d : generate_synthetic(cfg).documents) {
    std::vector<std::set<std::string>> segments(1);
    for (std::size_t i = 0; i < d.size(); ++i) {
      segments.back().insert(d.sentences[i].begin(), d.sentences[i].end());
      if (d.labels[i] == 1 && i + 1 < d.size()) segments.emplace_back();
    }
    for (std::size_t s = 0; s + 1 < segments.size(); ++s) {
      for (const auto& tok : segments[s]) EXPECT_EQ(segments[s + 1].count(tok), 0u) << tok;
    }
  }
}

TEST(Synthetic, InvariantsEdgesAndDeterminism) {
  SynthConfig cfg;
  cfg.num_docs = 30;
  cfg.seed = 11;
  const Corpus a = generate_synthetic(cfg);
  EXPECT_EQ(a, generate_synthetic(cfg));
  cfg.seed = 12;
  EXPECT_NE(a, generate_synthetic(cfg));
  for (const auto& d : a.documents) {
    EXPECT_NO_THROW(validate_document(d));
    EXPECT_EQ(d.edges.size(), d.size() - 1);
    // Every edge points into a segment-first sentence or stays inside one
    // segment.
    std::vector<int> seg(d.size());
    for (std::size_t i = 1; i < d.size(); ++i) seg[i] = seg[i - 1] + d.labels[i - 1];
    for (const Edge& e : d.edges) {
      const bool dep_is_first = e.dependent == 0 || d.labels[e.dependent - 1] == 1;
      if (seg[e.head] != seg[e.dependent]) {
        EXPECT_TRUE(dep_is_first);
        EXPECT_EQ(e.head, 0);
      }
    }
  }
}

TEST(Synthetic, ConfigValidation) {
  SynthConfig cfg;
  cfg.vocab_size = 3;
  cfg.num_topics = 5;
  EXPECT_THROW(generate_synthetic(cfg), ValidationError);
  cfg = {};
  cfg.num_topics = 1;
  EXPECT_THROW(generate_synthetic(cfg), ValidationError);
  cfg = {};
  cfg.tokens_per_sentence = {0, 3};
  EXPECT_THROW(generate_synthetic(cfg), ValidationError);
  cfg = {};
  cfg.sentences_per_segment = {5, 4};
  EXPECT_THROW(generate_synthetic(cfg), ValidationError);
}

TEST(Stats, ForcedShape) {
  SynthConfig cfg;
  cfg.num_docs = 7;
  cfg.segments_per_doc = {3, 3};
  cfg.sentences_per_segment = {4, 4};
  const CorpusStats s = corpus_stats(generate_synthetic(cfg));
  EXPECT_EQ(s.num_docs, 7u);
  EXPECT_DOUBLE_EQ(s.sentences_per_segment, 4.0);
  EXPECT_DOUBLE_EQ(s.segments_per_doc, 3.0);
  EXPECT_DOUBLE_EQ(s.boundary_rate, 2.0 / 11.0);
}

}  // namespace
}  // namespace topseg
