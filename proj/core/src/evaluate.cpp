#include "topseg/error.hpp"
#include "topseg/metrics.hpp"
#include "topseg/segmenter.hpp"

namespace topseg {

EvalReport evaluate(const SegmenterModel& model, const std::string& corpus_name,
                    const std::vector<PreparedDoc>& docs, KPolicy policy) {
  if (!model.tau()) throw Error("evaluate requires a tuned threshold");
  std::vector<std::string> ids;
  std::vector<Segmentation> refs;
  std::vector<Segmentation> hyps;
  ids.reserve(docs.size());
  for (const PreparedDoc& d : docs) {
    ids.push_back(d.doc->id);
    refs.push_back(Segmentation::from_labels(d.doc->labels));
    hyps.push_back(Segmentation::from_labels(model.predict(d).boundaries));
  }
  EvalReport report = score_segmentations(corpus_name, ids, refs, hyps, policy);
  report.tau = model.tau();
  return report;
}

}  // namespace topseg
