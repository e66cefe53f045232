#include "topseg/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "topseg/config_json.hpp"
#include "topseg/error.hpp"

namespace topseg {
namespace {

std::size_t lstm_params(std::size_t in, std::size_t hidden) {
  return 4 * hidden * in + 4 * hidden * hidden + 4 * hidden;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace

std::size_t count_params(const SegmenterModel& model) {
  return model.params().scalar_count();
}

std::size_t expected_param_count(const ModelConfig& cfg) {
  const auto& enc = cfg.encoder;
  const std::size_t h = static_cast<std::size_t>(enc.hidden_dim);
  const std::size_t state = 2 * h;
  std::size_t total = 0;
  if (enc.sentence_encoder == SentenceEncoderKind::trainable) {
    const std::size_t e = static_cast<std::size_t>(enc.embed_dim);
    total += static_cast<std::size_t>(enc.vocab_size) * e;
    total += 2 * lstm_params(e, h);
    total += state * state + 2 * state;  // attention pooling W, b, v
  }
  total += 2 * lstm_params(static_cast<std::size_t>(enc.sentence_dim()), h);

  std::size_t predictor_in = state;
  if (cfg.variant == Variant::discourse) {
    const std::size_t d = static_cast<std::size_t>(cfg.gat.dim);
    if (d != state) total += d * state + d;
    total += static_cast<std::size_t>(cfg.gat.num_layers * cfg.gat.num_heads) *
             (d * d + 2 * d);
    predictor_in += d;
  }
  const std::size_t ph = static_cast<std::size_t>(cfg.predictor_hidden);
  total += predictor_in * ph + ph + ph * 2 + 2;
  return total;
}

SpeedSample measure_speed(const SegmenterModel& model,
                          const std::vector<PreparedDoc>& docs, SpeedMode mode,
                          const SpeedOptions& opts) {
  if (opts.reps < 3) throw ValidationError("measure_speed needs reps >= 3");
  if (opts.warmup < 0) throw ValidationError("measure_speed needs warmup >= 0");
  if (opts.batch_size < 1) throw ValidationError("measure_speed needs batch_size >= 1");
  if (docs.empty()) throw ValidationError("measure_speed needs documents");

  using clock = std::chrono::steady_clock;
  SpeedSample sample;

  if (mode == SpeedMode::infer) {
    const double tau = model.tau().value_or(0.5);
    std::size_t sink = 0;
    auto pass = [&] {
      for (const PreparedDoc& d : docs) {
        sink += static_cast<std::size_t>(model.predict(d, tau).boundaries.back());
      }
    };
    for (int w = 0; w < opts.warmup; ++w) pass();
    for (int r = 0; r < opts.reps; ++r) {
      const auto t0 = clock::now();
      pass();
      const std::chrono::duration<double> dt = clock::now() - t0;
      sample.per_rep.push_back(static_cast<double>(docs.size()) / dt.count());
    }
    if (sink == 0) throw Error("inference produced no boundaries");
  } else {
    SegmenterModel copy = model;
    Adam adam;
    const std::size_t batch = static_cast<std::size_t>(opts.batch_size);
    const std::size_t n_batches = (docs.size() + batch - 1) / batch;
    auto pass = [&] {
      for (std::size_t start = 0; start < docs.size(); start += batch) {
        const std::size_t stop = std::min(docs.size(), start + batch);
        copy.params().zero_grad();
        for (std::size_t b = start; b < stop; ++b) {
          copy.loss_and_backward(docs[b], 1.0 / static_cast<double>(stop - start), true);
        }
        adam.step(copy.params());
      }
    };
    for (int w = 0; w < opts.warmup; ++w) pass();
    for (int r = 0; r < opts.reps; ++r) {
      const auto t0 = clock::now();
      pass();
      const std::chrono::duration<double> dt = clock::now() - t0;
      sample.per_rep.push_back(static_cast<double>(n_batches) / dt.count());
    }
  }
  sample.median = median(sample.per_rep);
  return sample;
}

Overhead relative_overhead(const BenchReport& basic, const BenchReport& variant) {
  if (basic.param_count == 0 || !(basic.t_speed > 0.0) || !(basic.i_speed > 0.0)) {
    throw ValidationError("relative_overhead needs a basic report with positive fields");
  }
  Overhead o;
  o.params_pct = (static_cast<double>(variant.param_count) /
                      static_cast<double>(basic.param_count) - 1.0) * 100.0;
  o.t_speed_pct = (1.0 - variant.t_speed / basic.t_speed) * 100.0;
  o.i_speed_pct = (1.0 - variant.i_speed / basic.i_speed) * 100.0;
  return o;
}

std::string hardware_note() {
  std::string model = "unknown cpu";
  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpuinfo, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(colon + 2);
      break;
    }
  }
  return model + ", " + std::to_string(std::thread::hardware_concurrency()) +
         " hardware threads, single-threaded timing";
}

std::string to_json(const BenchReport& report, int indent) {
  nlohmann::ordered_json j;
  j["variant"] = report.variant;
  j["param_count"] = report.param_count;
  j["t_speed"] = report.t_speed;
  j["i_speed"] = report.i_speed;
  j["hardware"] = report.hardware;
  j["config"] = report.config.empty() ? nlohmann::ordered_json(nullptr)
                                      : nlohmann::ordered_json::parse(report.config);
  return j.dump(indent);
}

BenchReport bench_report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    BenchReport r;
    r.variant = j.at("variant").get<std::string>();
    r.param_count = j.at("param_count").get<std::size_t>();
    r.t_speed = j.at("t_speed").get<double>();
    r.i_speed = j.at("i_speed").get<double>();
    r.hardware = j.value("hardware", "");
    if (j.contains("config") && !j.at("config").is_null()) r.config = j.at("config").dump();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bench report: ") + e.what());
  }
}

std::string format_bench_table(const std::vector<BenchReport>& reports) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "Model" << std::right << std::setw(12)
      << "# Params" << std::setw(12) << "T-Speed" << std::setw(12) << "I-Speed" << '\n';
  for (const auto& r : reports) {
    out << std::left << std::setw(12) << r.variant << std::right << std::setw(12)
        << r.param_count << std::fixed << std::setprecision(2) << std::setw(12)
        << r.t_speed << std::setw(12) << r.i_speed << '\n';
    out.unsetf(std::ios::floatfield);
  }
  return out.str();
}

}  // namespace topseg
