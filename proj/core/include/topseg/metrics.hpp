#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topseg/corpus.hpp"

namespace topseg {

// Boundary labels with labels.back() == 1; equivalently segment sizes.
class Segmentation {
 public:
  static Segmentation from_labels(std::vector<int> labels);
  static Segmentation from_sizes(std::span<const int> sizes);

  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<int>& labels() const { return labels_; }
  std::vector<int> sizes() const;
  int num_segments() const;

  friend bool operator==(const Segmentation&, const Segmentation&) = default;

 private:
  std::vector<int> labels_;
};

// max(1, round_half_up(n / (2 * segments))).
int window_size(const Segmentation& ref);

// Throws ValidationError when the lengths differ or n <= k.
double pk(const Segmentation& ref, const Segmentation& hyp,
          std::optional<int> k = {});
double windowdiff(const Segmentation& ref, const Segmentation& hyp,
                  std::optional<int> k = {});

// Reference implementation over explicit segment-id arrays; same contract
// as pk.
double pk_oracle(const Segmentation& ref, const Segmentation& hyp, int k);

// Non-final sentences become boundaries independently with probability p.
Segmentation random_segmenter(const Document& doc, double p,
                              std::uint64_t seed);

enum class KPolicy { per_document, corpus };

std::string to_string(KPolicy policy);
KPolicy parse_k_policy(const std::string& text);

// Corpus-level window: max(1, round_half_up(total sentences /
// (2 * total segments))).
int corpus_window_size(std::span<const Segmentation> refs);

struct DocumentScore {
  std::string id;
  int n = 0;
  int k = 0;
  double pk = 0.0;
  double windowdiff = 0.0;
};

struct EvalReport {
  std::string corpus;
  std::size_t n_docs = 0;
  // Means x100, one decimal.
  double pk = 0.0;
  double windowdiff = 0.0;
  std::optional<double> tau;
  KPolicy k_policy = KPolicy::per_document;
  std::vector<std::string> skipped_docs;
  std::vector<DocumentScore> documents;
  // Unrounded means in [0, 1].
  double pk_raw = 0.0;
  double windowdiff_raw = 0.0;
};

// Scores hypothesis segmentations against references. Documents with
// n <= k are skipped and listed in skipped_docs.
EvalReport score_segmentations(const std::string& corpus_name,
                               std::span<const std::string> ids,
                               std::span<const Segmentation> refs,
                               std::span<const Segmentation> hyps,
                               KPolicy policy = KPolicy::per_document);

// x100 rounded half away from zero to one decimal.
double report_scale(double fraction);

std::string to_json(const EvalReport& report, int indent = -1);
EvalReport eval_report_from_json(const std::string& text);

class SegmenterModel;
struct PreparedDoc;

// Runs the tuned model over prepared documents and scores them.
EvalReport evaluate(const SegmenterModel& model, const std::string& corpus_name,
                    const std::vector<PreparedDoc>& docs,
                    KPolicy policy = KPolicy::per_document);

}  // namespace topseg
