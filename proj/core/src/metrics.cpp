#include "topseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "topseg/error.hpp"

namespace topseg {
namespace {

// prefix[i] = number of boundaries among labels[0 .. i-1].
std::vector<int> boundary_prefix(const std::vector<int>& labels) {
  std::vector<int> prefix(labels.size() + 1, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) prefix[i + 1] = prefix[i] + labels[i];
  return prefix;
}

int resolve_window(const Segmentation& ref, const Segmentation& hyp,
                   std::optional<int> k) {
  if (ref.size() != hyp.size()) {
    throw ValidationError("reference has " + std::to_string(ref.size()) +
                          " sentences, hypothesis has " + std::to_string(hyp.size()));
  }
  const int window = k.value_or(window_size(ref));
  if (window < 1) throw ValidationError("window size must be >= 1");
  if (ref.size() <= window) {
    throw ValidationError("window size " + std::to_string(window) +
                          " is undefined for a document of " +
                          std::to_string(ref.size()) + " sentences");
  }
  return window;
}

int round_half_up_ratio(long num, long den) { return static_cast<int>((2 * num + den) / (2 * den)); }

}  // namespace

Segmentation Segmentation::from_labels(std::vector<int> labels) {
  if (labels.empty()) throw ValidationError("segmentation must be nonempty");
  for (int v : labels) {
    if (v != 0 && v != 1) throw ValidationError("segmentation labels must be 0 or 1");
  }
  if (labels.back() != 1) throw ValidationError("final label must be 1");
  Segmentation s;
  s.labels_ = std::move(labels);
  return s;
}

Segmentation Segmentation::from_sizes(std::span<const int> sizes) {
  if (sizes.empty()) throw ValidationError("segmentation must be nonempty");
  std::vector<int> labels;
  for (int size : sizes) {
    if (size < 1) throw ValidationError("segment sizes must be positive");
    labels.insert(labels.end(), static_cast<std::size_t>(size - 1), 0);
    labels.push_back(1);
  }
  return from_labels(std::move(labels));
}

std::vector<int> Segmentation::sizes() const {
  std::vector<int> out;
  int run = 0;
  for (int v : labels_) {
    ++run;
    if (v == 1) {
      out.push_back(run);
      run = 0;
    }
  }
  return out;
}

int Segmentation::num_segments() const {
  return static_cast<int>(std::count(labels_.begin(), labels_.end(), 1));
}

int window_size(const Segmentation& ref) {
  // n / (2S) rounded half up, in integers.
  return std::max(1, round_half_up_ratio(ref.size(), 2L * ref.num_segments()));
}

double pk(const Segmentation& ref, const Segmentation& hyp, std::optional<int> k) {
  const int window = resolve_window(ref, hyp, k);
  const int n = ref.size();
  const auto r = boundary_prefix(ref.labels());
  const auto h = boundary_prefix(hyp.labels());
  int errors = 0;
  for (int i = 0; i + window < n; ++i) {
    const bool ref_same = r[i + window] == r[i];
    const bool hyp_same = h[i + window] == h[i];
    if (ref_same != hyp_same) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(n - window);
}

double pk_oracle(const Segmentation& ref, const Segmentation& hyp, int k) {
  resolve_window(ref, hyp, k);
  const int n = ref.size();
  auto segment_ids = [n](const Segmentation& s) {
    std::vector<int> ids(static_cast<std::size_t>(n));
    int sentence = 0;
    int segment = 0;
    for (int size : s.sizes()) {
      for (int t = 0; t < size; ++t) ids[sentence++] = segment;
      ++segment;
    }
    return ids;
  };
  const auto ref_ids = segment_ids(ref);
  const auto hyp_ids = segment_ids(hyp);
  int errors = 0;
  int windows = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (j - i != k) continue;
      ++windows;
      if ((ref_ids[i] == ref_ids[j]) != (hyp_ids[i] == hyp_ids[j])) ++errors;
    }
  }
  return static_cast<double>(errors) / static_cast<double>(windows);
}

double windowdiff(const Segmentation& ref, const Segmentation& hyp,
                  std::optional<int> k) {
  const int window = resolve_window(ref, hyp, k);
  const int n = ref.size();
  const auto r = boundary_prefix(ref.labels());
  const auto h = boundary_prefix(hyp.labels());
  int errors = 0;
  for (int i = 0; i + window < n; ++i) {
    if (r[i + window] - r[i] != h[i + window] - h[i]) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(n - window);
}

Segmentation random_segmenter(const Document& doc, double p, std::uint64_t seed) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ValidationError("random segmenter probability must lie in (0, 1)");
  }
  const std::size_t n = doc.size();
  if (n == 0) throw ValidationError("document '" + doc.id + "' is empty");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i + 1 < n; ++i) labels[i] = coin(rng) ? 1 : 0;
  labels.back() = 1;
  return Segmentation::from_labels(std::move(labels));
}

std::string to_string(KPolicy policy) {
  return policy == KPolicy::per_document ? "per_document" : "corpus";
}

KPolicy parse_k_policy(const std::string& text) {
  if (text == "per_document") return KPolicy::per_document;
  if (text == "corpus") return KPolicy::corpus;
  throw ValidationError("unknown k policy '" + text + "' (expected per_document|corpus)");
}

int corpus_window_size(std::span<const Segmentation> refs) {
  long sentences = 0;
  long segments = 0;
  for (const auto& r : refs) {
    sentences += r.size();
    segments += r.num_segments();
  }
  if (segments == 0) throw ValidationError("corpus window needs at least one segment");
  return std::max(1, round_half_up_ratio(sentences, 2 * segments));
}

double report_scale(double fraction) { return std::round(fraction * 1000.0) / 10.0; }

EvalReport score_segmentations(const std::string& corpus_name,
                               std::span<const std::string> ids,
                               std::span<const Segmentation> refs,
                               std::span<const Segmentation> hyps, KPolicy policy) {
  if (ids.size() != refs.size() || refs.size() != hyps.size()) {
    throw ValidationError("score_segmentations: input lengths differ");
  }
  EvalReport report;
  report.corpus = corpus_name;
  report.k_policy = policy;
  const int corpus_k = policy == KPolicy::corpus && !refs.empty()
                           ? corpus_window_size(refs)
                           : 0;
  double pk_sum = 0.0;
  double wd_sum = 0.0;
  for (std::size_t d = 0; d < refs.size(); ++d) {
    const int k = policy == KPolicy::corpus ? corpus_k : window_size(refs[d]);
    if (refs[d].size() <= k) {
      report.skipped_docs.push_back(ids[d]);
      continue;
    }
    DocumentScore score;
    score.id = ids[d];
    score.n = refs[d].size();
    score.k = k;
    score.pk = pk(refs[d], hyps[d], k);
    score.windowdiff = windowdiff(refs[d], hyps[d], k);
    pk_sum += score.pk;
    wd_sum += score.windowdiff;
    report.documents.push_back(std::move(score));
  }
  report.n_docs = report.documents.size();
  if (report.n_docs > 0) {
    report.pk_raw = pk_sum / static_cast<double>(report.n_docs);
    report.windowdiff_raw = wd_sum / static_cast<double>(report.n_docs);
  }
  report.pk = report_scale(report.pk_raw);
  report.windowdiff = report_scale(report.windowdiff_raw);
  return report;
}

std::string to_json(const EvalReport& report, int indent) {
  nlohmann::ordered_json j;
  j["corpus"] = report.corpus;
  j["n_docs"] = report.n_docs;
  j["pk"] = report.pk;
  j["windowdiff"] = report.windowdiff;
  j["tau"] = report.tau ? nlohmann::ordered_json(*report.tau) : nlohmann::ordered_json(nullptr);
  j["k_policy"] = to_string(report.k_policy);
  j["skipped_docs"] = report.skipped_docs;
  nlohmann::ordered_json docs = nlohmann::ordered_json::array();
  for (const auto& d : report.documents) {
    docs.push_back({{"id", d.id}, {"n", d.n}, {"k", d.k}, {"pk", d.pk},
                    {"windowdiff", d.windowdiff}});
  }
  j["documents"] = std::move(docs);
  j["pk_raw"] = report.pk_raw;
  j["windowdiff_raw"] = report.windowdiff_raw;
  return j.dump(indent);
}

EvalReport eval_report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.corpus = j.at("corpus").get<std::string>();
    r.n_docs = j.at("n_docs").get<std::size_t>();
    r.pk = j.at("pk").get<double>();
    r.windowdiff = j.at("windowdiff").get<double>();
    if (!j.at("tau").is_null()) r.tau = j.at("tau").get<double>();
    r.k_policy = parse_k_policy(j.at("k_policy").get<std::string>());
    r.skipped_docs = j.at("skipped_docs").get<std::vector<std::string>>();
    if (auto it = j.find("documents"); it != j.end()) {
      for (const auto& d : *it) {
        r.documents.push_back({d.at("id").get<std::string>(), d.at("n").get<int>(),
                               d.at("k").get<int>(), d.at("pk").get<double>(),
                               d.at("windowdiff").get<double>()});
      }
    }
    r.pk_raw = j.value("pk_raw", r.pk / 100.0);
    r.windowdiff_raw = j.value("windowdiff_raw", r.windowdiff / 100.0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("eval report: ") + e.what());
  }
}

}  // namespace topseg
