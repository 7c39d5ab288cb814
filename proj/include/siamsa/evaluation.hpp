#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "siamsa/dataset.hpp"
#include "siamsa/image_io.hpp"
#include "siamsa/metrics.hpp"
#include "siamsa/tracker.hpp"

namespace siamsa {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index runs
/// exactly once; the first failure (by index) is rethrown after all finish.
inline void parallel_for(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

using FrameLoader = std::function<Image(std::size_t)>;

/// One-pass evaluation: initialize on the first ground-truth box, then track
/// every later frame without looking at ground truth again.
inline std::vector<BBox> run_ope(const Tracker& tracker, const BBox& init_box,
                                 std::size_t frame_count, const FrameLoader& load) {
  if (frame_count == 0) throw InvalidInput("run_ope: empty sequence");
  std::vector<BBox> out;
  out.reserve(frame_count);
  TrackerState st = tracker.init(load(0), init_box);
  out.push_back(init_box);
  for (std::size_t t = 1; t < frame_count; ++t) out.push_back(tracker.track_frame(st, load(t)).box);
  return out;
}

inline std::vector<BBox> run_ope(const Tracker& tracker, const SequenceRecord& seq) {
  return run_ope(tracker, seq.ground_truth.at(0), seq.frames.size(),
                 [&](std::size_t t) { return read_image(seq.frames[t]); });
}

struct TrackRunOptions {
  std::size_t workers = 1;
  std::string weights_source = "random";
};

/// Tracks every sequence under `dataset` and writes <out>/<seq>.txt plus a
/// run_info.cfg recording the configuration and seed.
inline std::vector<std::string> track_dataset(const fs::path& dataset, const fs::path& out,
                                              const TrackerConfig& cfg,
                                              std::shared_ptr<const NetworkWeights> weights,
                                              const TrackRunOptions& opts) {
  const std::vector<fs::path> dirs = list_sequences(dataset);
  std::vector<SequenceRecord> records;
  for (const auto& d : dirs) records.push_back(load_sequence(d));
  fs::create_directories(out);
  const Tracker tracker(cfg, std::move(weights));
  parallel_for(records.size(), opts.workers, [&](std::size_t i) {
    write_boxes(out / (records[i].name + ".txt"), run_ope(tracker, records[i]));
  });
  std::string info;
  info += "seed = " + std::to_string(tracker.weights().seed) + "\n";
  info += "weights = " + opts.weights_source + "\n";
  info += "enable_psan = " + std::string(cfg.enable_psan ? "true" : "false") + "\n";
  info += "enable_sa_apn = " + std::string(cfg.enable_sa_apn ? "true" : "false") + "\n";
  info += "window_influence = " + format_double(cfg.window_influence) + "\n";
  info += "size_smoothing = " + format_double(cfg.size_smoothing) + "\n";
  info += "context_margin = " + format_double(cfg.context_margin) + "\n";
  write_text_file(out / "run_info.cfg", info);
  std::vector<std::string> names;
  for (const auto& r : records) names.push_back(r.name);
  return names;
}

struct EvalReport {
  std::vector<SequenceMetrics> sequences;  // sorted by name
  Aggregate overall;
  std::map<std::string, std::optional<Aggregate>> attributes;
  SvHistogram sv;
  KeyValues run_info;
};

/// Builds the report from per-sequence metrics and their ground truth.
inline EvalReport build_report(std::vector<SequenceMetrics> metrics,
                               const std::vector<SequenceRecord>& records, KeyValues run_info = {}) {
  if (metrics.size() != records.size()) throw InvalidInput("report: sequence sets differ");
  std::sort(metrics.begin(), metrics.end(),
            [](const SequenceMetrics& a, const SequenceMetrics& b) { return a.name < b.name; });
  EvalReport r;
  for (auto& m : metrics) {
    const auto it = std::find_if(records.begin(), records.end(),
                                 [&](const SequenceRecord& s) { return s.name == m.name; });
    if (it == records.end()) throw InvalidInput("report: no record for sequence " + m.name);
    m.attributes = it->attributes;
  }
  std::vector<const SequenceRecord*> sorted;
  for (const auto& rec : records) sorted.push_back(&rec);
  std::sort(sorted.begin(), sorted.end(),
            [](const SequenceRecord* a, const SequenceRecord* b) { return a->name < b->name; });
  for (const SequenceRecord* rec : sorted) r.sv += sv_histogram(rec->ground_truth);
  r.overall = aggregate(metrics);
  r.attributes = attribute_report(metrics);
  r.sequences = std::move(metrics);
  r.run_info = std::move(run_info);
  return r;
}

inline EvalReport evaluate_dataset(const fs::path& dataset, const fs::path& results,
                                   std::size_t workers = 1) {
  std::vector<SequenceRecord> records;
  for (const auto& d : list_sequences(dataset)) records.push_back(load_sequence(d));
  std::vector<SequenceMetrics> metrics(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const fs::path p = results / (records[i].name + ".txt");
    if (!fs::exists(p)) throw InvalidInput("missing result file " + p.string());
    const std::vector<BBox> pred = read_boxes(p);
    if (pred.size() != records[i].ground_truth.size())
      throw InvalidInput("result " + p.string() + " has " + std::to_string(pred.size()) +
                         " boxes, sequence has " + std::to_string(records[i].ground_truth.size()) +
                         " frames");
    metrics[i] = evaluate_sequence(records[i].name, records[i].attributes, pred,
                                   records[i].ground_truth);
  });
  KeyValues info;
  if (fs::exists(results / "run_info.cfg"))
    info = parse_key_values(read_text_file(results / "run_info.cfg"), "run_info.cfg");
  return build_report(std::move(metrics), records, std::move(info));
}

// ---------------------------------------------------------------------------
// Serialization

using Json = nlohmann::ordered_json;

inline Json curve_json(const Curve& c) {
  return Json{{"start", c.start}, {"stop", c.stop}, {"values", c.values}};
}

inline Curve curve_from_json(const Json& j) {
  return {j.at("start").get<double>(), j.at("stop").get<double>(),
          j.at("values").get<std::vector<double>>()};
}

inline Json aggregate_json(const Aggregate& a) {
  return Json{{"sequences", a.sequences},
              {"auc_success", a.auc_success},
              {"auc_np", a.auc_np},
              {"success", curve_json(a.curves.success)},
              {"normalized_precision", curve_json(a.curves.np)}};
}

inline Aggregate aggregate_from_json(const Json& j) {
  Aggregate a;
  a.sequences = j.at("sequences").get<std::size_t>();
  a.auc_success = j.at("auc_success").get<double>();
  a.auc_np = j.at("auc_np").get<double>();
  a.curves.success = curve_from_json(j.at("success"));
  a.curves.np = curve_from_json(j.at("normalized_precision"));
  return a;
}

/// Structured report. Absent attributes are null, never zero.
inline Json report_json(const EvalReport& r) {
  Json j;
  j["format"] = "siamsa-eval-report";
  j["version"] = 1;
  Json info = Json::object();
  for (const auto& [k, v] : r.run_info) info[k] = v;
  j["run_info"] = info;
  j["overall"] = aggregate_json(r.overall);
  Json attrs = Json::object();
  for (const auto& [tag, agg] : r.attributes) attrs[tag] = agg ? aggregate_json(*agg) : Json(nullptr);
  j["attributes"] = attrs;
  Json bins = Json::array();
  const auto fr = r.sv.fractions();
  for (std::size_t i = 0; i < kSvBins; ++i)
    bins.push_back(Json{{"low", SvHistogram::bin_low(i)},
                        {"high", SvHistogram::bin_high(i)},
                        {"frames", r.sv.counts[i]},
                        {"fraction", fr[i]}});
  j["sv_histogram"] = Json{{"total_frames", r.sv.total_frames},
                           {"sv_frames", r.sv.sv_frames},
                           {"bins", bins}};
  Json seqs = Json::array();
  for (const auto& m : r.sequences)
    seqs.push_back(Json{{"name", m.name},
                        {"frames", m.frames},
                        {"attributes", m.attributes},
                        {"auc_success", m.auc_success},
                        {"auc_np", m.auc_np},
                        {"success", curve_json(m.curves.success)},
                        {"normalized_precision", curve_json(m.curves.np)}});
  j["sequences"] = seqs;
  return j;
}

inline EvalReport report_from_json(const Json& j) {
  if (j.value("format", "") != "siamsa-eval-report") throw InvalidInput("not a siamsa eval report");
  EvalReport r;
  for (const auto& [k, v] : j.at("run_info").items()) r.run_info[k] = v.get<std::string>();
  r.overall = aggregate_from_json(j.at("overall"));
  for (const auto& [tag, v] : j.at("attributes").items())
    r.attributes[tag] = v.is_null() ? std::nullopt : std::optional<Aggregate>(aggregate_from_json(v));
  const Json& sv = j.at("sv_histogram");
  r.sv.total_frames = sv.at("total_frames").get<std::size_t>();
  r.sv.sv_frames = sv.at("sv_frames").get<std::size_t>();
  const Json& bins = sv.at("bins");
  for (std::size_t i = 0; i < kSvBins && i < bins.size(); ++i)
    r.sv.counts[i] = bins[i].at("frames").get<std::size_t>();
  for (const auto& s : j.at("sequences")) {
    SequenceMetrics m;
    m.name = s.at("name").get<std::string>();
    m.frames = s.at("frames").get<std::size_t>();
    m.attributes = s.at("attributes").get<std::vector<std::string>>();
    m.auc_success = s.at("auc_success").get<double>();
    m.auc_np = s.at("auc_np").get<double>();
    m.curves.success = curve_from_json(s.at("success"));
    m.curves.np = curve_from_json(s.at("normalized_precision"));
    r.sequences.push_back(std::move(m));
  }
  return r;
}

/// Flat CSV: scope,metric,threshold,value, one row per curve sample.
inline std::string curves_csv(const EvalReport& r) {
  std::string out = "scope,metric,threshold,value\n";
  auto emit = [&](const std::string& scope, const CurvePair& c) {
    for (std::size_t i = 0; i < c.success.size(); ++i)
      out += scope + ",success," + format_double(success_threshold(i)) + "," +
             format_double(c.success.values[i]) + "\n";
    for (std::size_t i = 0; i < c.np.size(); ++i)
      out += scope + ",normalized_precision," + format_double(np_threshold(i)) + "," +
             format_double(c.np.values[i]) + "\n";
  };
  emit("overall", r.overall.curves);
  for (const auto& [tag, agg] : r.attributes)
    if (agg) emit("attribute:" + tag, agg->curves);
  for (const auto& m : r.sequences) emit("sequence:" + m.name, m.curves);
  return out;
}

/// Writes <report> (JSON) and <report>.curves.csv next to it.
inline void write_report(const fs::path& path, const EvalReport& r) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text_file(path, report_json(r).dump(2) + "\n");
  write_text_file(fs::path(path.string() + ".curves.csv"), curves_csv(r));
}

inline EvalReport read_report(const fs::path& path) {
  try {
    return report_from_json(Json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path.string() + ": malformed report: " + e.what());
  }
}

}  // namespace siamsa
