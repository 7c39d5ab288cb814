// siamsa: tracking, evaluation and synthetic-data command line.
// Exit codes: 0 success, 1 invalid input, 2 internal invariant violation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "criteria.hpp"
#include "siamsa/siamsa.hpp"

namespace fs = std::filesystem;
using namespace siamsa;

namespace {

constexpr int kOk = 0, kInvalid = 1, kInternal = 2;

std::string bar(double fraction, std::size_t width) {
  const auto n = static_cast<std::size_t>(std::lround(std::clamp(fraction, 0.0, 1.0) * width));
  return std::string(n, '#') + std::string(width - n, '.');
}

std::string fixed(double v, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct TrackArgs {
  std::string dataset, out, config, weights, save_weights;
  std::optional<std::uint64_t> seed;
  bool disable_psan = false, disable_sa_apn = false;
  std::size_t workers = 1;
};

int run_track(const TrackArgs& a) {
  TrackerConfig cfg = TrackerConfig::load(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.disable_psan) cfg.enable_psan = false;
  if (a.disable_sa_apn) cfg.enable_sa_apn = false;
  if (!a.weights.empty() && !fs::exists(a.weights))
    throw InvalidInput("weights file not found: " + a.weights);
  auto weights = load_or_init_weights(cfg, a.weights);
  if (!a.save_weights.empty()) weights->to_store().save(a.save_weights);
  const std::string source = a.weights.empty() ? "random" : fs::path(a.weights).filename().string();
  const auto names = track_dataset(a.dataset, a.out, cfg, weights, {a.workers, source});
  std::cout << "tracked " << names.size() << " sequence(s) into " << a.out << "\n";
  return kOk;
}

int run_eval(const std::string& dataset, const std::string& results, const std::string& report,
             std::size_t workers) {
  const EvalReport r = evaluate_dataset(dataset, results, workers);
  write_report(report, r);
  std::cout << "sequences " << r.overall.sequences << "  success AUC " << fixed(r.overall.auc_success)
            << "  NP AUC " << fixed(r.overall.auc_np) << "\nreport written to " << report << "\n";
  return kOk;
}

int run_report(const std::string& path, bool attribute_plots, bool sv_plot) {
  const EvalReport r = read_report(path);
  std::cout << "report " << path << "\n";
  if (!r.run_info.empty()) {
    std::cout << "run:";
    for (const auto& [k, v] : r.run_info) std::cout << " " << k << "=" << v;
    std::cout << "\n";
  }
  std::cout << "overall  sequences " << r.overall.sequences << "  success AUC "
            << fixed(r.overall.auc_success) << "  NP AUC " << fixed(r.overall.auc_np) << "\n";
  for (const auto& m : r.sequences)
    std::cout << "  " << m.name << "  frames " << m.frames << "  success " << fixed(m.auc_success)
              << "  NP " << fixed(m.auc_np) << "\n";

  if (attribute_plots) {
    std::string csv = "attribute,sequences,auc_success,auc_np\n";
    std::cout << "\nper-attribute AUC (success | normalized precision)\n";
    for (const auto& [tag, agg] : r.attributes) {
      char label[16];
      std::snprintf(label, sizeof label, "%-6s", tag.c_str());
      if (!agg) {
        std::cout << "  " << label << " absent\n";
        csv += tag + ",0,,\n";
        continue;
      }
      std::cout << "  " << label << " " << bar(agg->auc_success, 30) << " " << fixed(agg->auc_success)
                << " | " << bar(agg->auc_np, 30) << " " << fixed(agg->auc_np) << "  (n="
                << agg->sequences << ")\n";
      csv += tag + "," + std::to_string(agg->sequences) + "," + format_double(agg->auc_success) +
             "," + format_double(agg->auc_np) + "\n";
    }
    write_text_file(path + ".attributes.csv", csv);
    std::cout << "attribute table written to " << path << ".attributes.csv\n";
  }

  if (sv_plot) {
    const auto fr = r.sv.fractions();
    double peak = 0.0;
    for (double f : fr) peak = std::max(peak, f);
    std::string csv = "low,high,frames,fraction\n";
    std::cout << "\nscale variation |log2 R|: " << r.sv.sv_frames << " of " << r.sv.total_frames
              << " frames are SV\n";
    for (std::size_t i = 0; i < kSvBins; ++i) {
      const double lo = SvHistogram::bin_low(i), hi = SvHistogram::bin_high(i);
      std::cout << "  [" << fixed(lo, 1) << "," << fixed(hi, 1) << ") "
                << bar(peak > 0.0 ? fr[i] / peak : 0.0, 40) << " " << fixed(fr[i], 4) << "\n";
      csv += format_double(lo) + "," + format_double(hi) + "," + std::to_string(r.sv.counts[i]) +
             "," + format_double(fr[i]) + "\n";
    }
    write_text_file(path + ".sv.csv", csv);
    std::cout << "histogram written to " << path << ".sv.csv\n";
  }
  return kOk;
}

int run_synth(const std::string& spec_path, const std::string& out, std::uint64_t seed) {
  const auto specs = parse_synth_specs(read_text_file(spec_path), spec_path);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    // Each sequence draws its own texture stream from the run seed.
    const SequenceRecord rec = write_synth_sequence(synth_sequence(specs[i], splitmix64(seed + i)), out);
    std::cout << rec.name << ": " << rec.frames.size() << " frames";
    for (const auto& tag : rec.attributes) std::cout << " " << tag;
    std::cout << "\n";
  }
  return kOk;
}

int run_selftest() {
  const fs::path scratch = fs::temp_directory_path() / "siamsa_selftest";
  const auto results = acceptance::run_all(scratch);
  fs::remove_all(scratch);
  bool ok = true;
  for (const auto& r : results) {
    std::cout << acceptance::format_result(r) << "\n";
    ok = ok && r.passed;
  }
  return ok ? kOk : kInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scale-aware Siamese tracker and benchmark harness"};
  app.require_subcommand(1);

  TrackArgs track;
  auto* t = app.add_subcommand("track", "Track every sequence of a dataset");
  t->add_option("--dataset", track.dataset, "Dataset root")->required();
  t->add_option("--out", track.out, "Directory for per-sequence result files")->required();
  t->add_option("--config", track.config, "Tracker configuration file")->required();
  t->add_option("--weights", track.weights, "Weights file (default: seeded random init)");
  t->add_option("--save-weights", track.save_weights, "Write the weights in use to this file");
  t->add_option("--seed", track.seed, "Override the configured seed");
  t->add_flag("--disable-psan", track.disable_psan, "Skip the pairwise scale-channel attention");
  t->add_flag("--disable-sa-apn", track.disable_sa_apn, "Use fixed anchors instead of SA-APN");
  t->add_option("--workers", track.workers, "Sequences tracked in parallel")->check(CLI::PositiveNumber);

  std::string dataset, results, report;
  std::size_t workers = 1;
  auto* e = app.add_subcommand("eval", "Score result files against ground truth");
  e->add_option("--dataset", dataset, "Dataset root")->required();
  e->add_option("--results", results, "Directory of result files")->required();
  e->add_option("--report", report, "Report path (JSON; curves CSV written alongside)")->required();
  e->add_option("--workers", workers, "Sequences scored in parallel")->check(CLI::PositiveNumber);

  bool attribute_plots = false, sv_plot = false;
  auto* r = app.add_subcommand("report", "Summarize an evaluation report");
  r->add_option("--report", report, "Report written by eval")->required();
  r->add_flag("--attribute-plots", attribute_plots, "Per-attribute AUC chart and CSV");
  r->add_flag("--sv-histogram", sv_plot, "Scale-variation histogram and CSV");

  std::string spec, out;
  std::uint64_t seed = 0;
  auto* s = app.add_subcommand("synth", "Render synthetic sequences");
  s->add_option("--spec", spec, "Synthetic sequence spec file")->required();
  s->add_option("--out", out, "Dataset root to write")->required();
  s->add_option("--seed", seed, "Texture seed")->required();

  auto* st = app.add_subcommand("selftest", "Run the acceptance oracles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (t->parsed()) return run_track(track);
    if (e->parsed()) return run_eval(dataset, results, report, workers);
    if (r->parsed()) return run_report(report, attribute_plots, sv_plot);
    if (s->parsed()) return run_synth(spec, out, seed);
    if (st->parsed()) return run_selftest();
  } catch (const InvalidInput& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kInvalid;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kInvalid;
  } catch (const InvariantViolation& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return kInternal;
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return kInternal;
  }
  return kInvalid;
}
