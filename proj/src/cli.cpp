#include "featstat/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "featstat/analysis.hpp"
#include "featstat/caption_metrics.hpp"
#include "featstat/error.hpp"
#include "featstat/feature_stats.hpp"
#include "featstat/svg_chart.hpp"
#include "featstat/synthgen.hpp"
#include "featstat/tensor_store.hpp"

namespace featstat::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Reads `--config` files written as JSON. Nested objects address subcommands,
/// e.g. {"stopcheck": {"epsilon": 0.1}}; keys are the long flag names.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json doc = json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames().front();
      if (opt->count() > 0) {
        doc[name] = opt->results().size() == 1 ? json(opt->results().front()) : json(opt->results());
      } else if (default_also && !opt->get_default_str().empty()) {
        doc[name] = opt->get_default_str();
      }
    }
    return doc.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json doc;
    try {
      doc = json::parse(input);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError("config", std::string("invalid JSON config: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    collect(doc, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const json& node, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    if (!node.is_object()) throw CLI::ConversionError("config", "config root must be an object");
    for (const auto& [key, value] : node.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        collect(value, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

struct StatFlags {
  std::string kurtosis = "fisher-excess";
  std::string skewness = "biased-g1";
  std::string time_mode = "per-frame";
  bool lenient = false;

  void attach(CLI::App& cmd) {
    cmd.add_option("--definition", kurtosis, "Kurtosis definition")
        ->check(CLI::IsMember({"fisher-excess", "pearson-beta2"}))
        ->capture_default_str();
    cmd.add_option("--skew-definition", skewness, "Skewness definition")
        ->check(CLI::IsMember({"biased-g1", "sample-std"}))
        ->capture_default_str();
    cmd.add_option("--time-mode", time_mode, "Channel statistic per frame or over flattened time")
        ->check(CLI::IsMember({"per-frame", "flatten-time"}))
        ->capture_default_str();
    cmd.add_flag("--lenient", lenient, "Skip non-finite slices instead of rejecting the tensor");
  }

  StatDefinition definition() const {
    StatDefinition def;
    def.kurtosis = kurtosis == "pearson-beta2" ? KurtosisKind::PearsonBeta2
                                               : KurtosisKind::FisherExcess;
    def.skewness = skewness == "sample-std" ? SkewnessKind::SampleStd : SkewnessKind::BiasedG1;
    return def;
  }
  TimeMode mode() const {
    return time_mode == "flatten-time" ? TimeMode::FlattenTime : TimeMode::PerFrame;
  }
  ReadMode read_mode() const { return lenient ? ReadMode::Lenient : ReadMode::Strict; }
};

/// Writes to the named file, or to `fallback` when the name is empty.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
      }
      file_.open(path, std::ios::trunc);
      if (!file_) throw Error(Errc::IoError, "cannot open " + path + " for writing");
      stream_ = &file_;
    }
  }
  std::ostream& stream() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

std::ifstream open_input(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, std::string("cannot open ") + what + " " + path);
  return in;
}

std::string method_name(CorrelationMethod m) {
  return m == CorrelationMethod::Pearson ? "pearson" : "spearman";
}

std::vector<CorrelationMethod> parse_methods(const std::string& method) {
  if (method == "pearson") return {CorrelationMethod::Pearson};
  if (method == "spearman") return {CorrelationMethod::Spearman};
  return {CorrelationMethod::Pearson, CorrelationMethod::Spearman};
}

json correlation_json(const StatTrajectory& trajectory, const ScoreSeries& scores,
                      const std::vector<CorrelationMethod>& methods) {
  json doc = {{"kurtosis", json::object()}, {"skewness", json::object()}};
  for (const auto method : methods) {
    const RunCorrelation r = correlate_run(trajectory, scores, method);
    doc["kurtosis"][method_name(method)] = r.kurtosis.coefficient;
    doc["kurtosis"]["n_points"] = r.kurtosis.n_points;
    doc["skewness"][method_name(method)] = r.skewness.coefficient;
    doc["skewness"]["n_points"] = r.skewness.n_points;
  }
  return doc;
}

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

TensorShape parse_dims(const std::string& text) {
  const auto parts = split_csv_list(text);
  if (parts.size() != 3) throw Error(Errc::InvalidArgument, "--dims expects T,B,C");
  std::uint64_t v[3];
  for (int i = 0; i < 3; ++i) {
    const auto& p = parts[i];
    const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v[i]);
    if (ec != std::errc() || ptr != p.data() + p.size() || v[i] == 0) {
      throw Error(Errc::InvalidArgument, "--dims entries must be positive integers");
    }
  }
  return {v[0], v[1], v[2]};
}

EpochSelector parse_selector(const std::string& text) {
  if (text == "final") return EpochSelector::final_epoch();
  if (text == "best") return EpochSelector::best();
  std::size_t k = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), k);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(Errc::InvalidArgument, "--at expects final, best or an epoch index");
  }
  return EpochSelector::at(k);
}

// ---------------------------------------------------------------------------

int cmd_stats(const std::string& manifest_path, const StatFlags& flags, const std::string& out_path,
              std::ostream& out) {
  const RunManifest manifest = load_manifest(manifest_path);
  const StatTrajectory trajectory =
      run_trajectory(manifest, flags.definition(), flags.mode(), flags.read_mode());
  Output sink(out_path, out);
  write_stats_csv(trajectory, sink.stream());
  return kExitOk;
}

int cmd_eval(const std::string& corpus_path, const std::string& metrics_list,
             const std::string& spice_path, const std::string& out_path, bool per_item,
             std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_corpus(corpus_path);
  std::optional<std::map<std::string, double>> spice;
  if (!spice_path.empty()) spice = load_spice(spice_path);
  const MetricReport report = evaluate(corpus, split_csv_list(metrics_list), spice);
  if (report.bleu_zero_precision) {
    err << "warning: some BLEU order has no matched n-gram; BLEU reported as 0\n";
  }
  json doc = json::object();
  for (const auto& [name, value] : report.scores) doc[name] = value;
  if (per_item) {
    json items = json::object();
    if (!report.per_item_cider.empty()) items["cider"] = report.per_item_cider;
    if (!report.per_item_rouge_l.empty()) items["rouge_l"] = report.per_item_rouge_l;
    json ids = json::array();
    for (const auto& r : corpus) ids.push_back(r.item_id);
    items["ids"] = ids;
    doc["per_item"] = items;
  }
  Output sink(out_path, out);
  sink.stream() << doc.dump() << '\n';
  return kExitOk;
}

int cmd_correlate(const std::string& stats_path, const std::string& scores_path,
                  const std::string& method, const std::string& metric,
                  const std::string& out_path, std::ostream& out) {
  auto stats_in = open_input(stats_path, "stats CSV");
  const StatTrajectory trajectory = read_stats_csv(stats_in);
  auto scores_in = open_input(scores_path, "scores CSV");
  const ScoreSeries scores = read_scores_csv(scores_in, metric);
  const json doc = correlation_json(trajectory, scores, parse_methods(method));
  Output sink(out_path, out);
  sink.stream() << doc.dump() << '\n';
  return kExitOk;
}

int cmd_stopcheck(const std::string& stats_path, double epsilon, int window, std::ostream& out) {
  auto in = open_input(stats_path, "stats CSV");
  const StatTrajectory trajectory = read_stats_csv(in);
  const StopDecision d = stop_check(trajectory, epsilon, window);
  json doc = {{"stop", d.should_stop}};
  if (d.should_stop) {
    doc["epoch"] = *d.stop_epoch;
    doc["index"] = *d.stop_index;
  }
  doc["window"] = window;
  doc["epsilon"] = epsilon;
  out << doc.dump() << '\n';
  return d.should_stop ? kExitOk : kExitNoStop;
}

int cmd_rank(const std::vector<std::string>& manifests, const std::string& statistic,
             const std::string& at, const StatFlags& flags, const std::string& out_path,
             std::ostream& out) {
  const EpochSelector selector = parse_selector(at);
  std::vector<Candidate> candidates;
  for (const auto& path : manifests) {
    const RunManifest manifest = load_manifest(path);
    Candidate c;
    c.trajectory = run_trajectory(manifest, flags.definition(), flags.mode(), flags.read_mode());
    c.encoder_tag = manifest.encoder_tag();
    if (c.encoder_tag.empty()) c.encoder_tag = path;
    candidates.push_back(std::move(c));
  }
  const RankStatistic stat = statistic == "skewness"   ? RankStatistic::Skewness
                             : statistic == "combined" ? RankStatistic::Combined
                                                       : RankStatistic::Kurtosis;
  const ModelRanking ranking = rank_models(candidates, selector, stat);
  json entries = json::array();
  for (const auto& m : ranking.entries) entries.push_back({{"encoder", m.encoder_tag}, {"value", m.value}});
  const json doc = {{"statistic", statistic}, {"at", at}, {"ranking", entries}};
  Output sink(out_path, out);
  sink.stream() << doc.dump() << '\n';
  return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& dims, const std::string& out_dir,
              std::ostream& out) {
  const TrajectorySpec spec = load_trajectory_spec(spec_path);
  const RunManifest manifest = generate_run(spec, parse_dims(dims), out_dir);
  out << "wrote " << manifest.entries.size() << " epoch(s) to "
      << (fs::path(out_dir) / "manifest.jsonl").string() << '\n';
  return kExitOk;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error(Errc::IoError, "failed to write " + path.string());
}

int cmd_report(const std::string& run_dir, std::string out_dir, const std::string& metric,
               const StatFlags& flags, std::ostream& out) {
  const RunManifest manifest = load_manifest(fs::path(run_dir) / "manifest.jsonl");
  const StatTrajectory trajectory =
      run_trajectory(manifest, flags.definition(), flags.mode(), flags.read_mode());
  if (out_dir.empty()) out_dir = (fs::path(run_dir) / "report").string();
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  std::vector<std::string> files;

  {
    std::ostringstream csv;
    write_stats_csv(trajectory, csv);
    write_text(dir / "stats.csv", csv.str());
    files.emplace_back("stats.csv");
  }

  json metrics = json::array();
  for (const auto& e : manifest.entries) {
    json row = {{"epoch", e.epoch}};
    row["scores"] = e.scores ? json(*e.scores) : json(nullptr);
    metrics.push_back(row);
  }
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  files.emplace_back("metrics.json");

  const ScoreSeries scores = scores_from_manifest(manifest, metric);
  try {
    const json corr = correlation_json(
        trajectory, scores, {CorrelationMethod::Pearson, CorrelationMethod::Spearman});
    write_text(dir / "correlation.json", corr.dump(2) + "\n");
    files.emplace_back("correlation.json");
  } catch (const Error& e) {
    if (e.code() != Errc::InsufficientOverlap && e.code() != Errc::ConstantSeries) throw;
  }

  const std::string tag = trajectory.encoder_tag.empty() ? "run" : trajectory.encoder_tag;
  for (const bool is_kurtosis : {true, false}) {
    TwinAxisChart chart;
    const std::string stat_name = is_kurtosis ? "kurtosis" : "skewness";
    chart.title = (is_kurtosis ? "Kurtosis of encoder: " : "Skewness of encoder: ") + tag;
    chart.left.label = stat_name;
    chart.left.color = "#1f77b4";
    for (const auto& e : trajectory.epochs) {
      chart.left.points.emplace_back(static_cast<double>(e.epoch),
                                     is_kurtosis ? e.kurtosis : e.skewness);
    }
    if (!scores.empty()) {
      ChartSeries right;
      right.label = metric;
      right.color = "#ff7f0e";
      for (const auto& [epoch, value] : scores) {
        right.points.emplace_back(static_cast<double>(epoch), value);
      }
      chart.right = std::move(right);
    }
    write_text(dir / (stat_name + ".svg"), render_svg(chart));
    files.push_back(stat_name + ".svg");
  }

  const json index = {{"run", run_dir}, {"files", files}};
  write_text(dir / "index.json", index.dump(2) + "\n");
  out << "wrote report to " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature kurtosis/skewness profiler and caption-metric analysis toolkit",
               "featstat"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file with the same keys as the flags");
  app.require_subcommand(1);

  StatFlags stat_flags;
  std::string out_path;

  auto* stats = app.add_subcommand("stats", "Per-epoch kurtosis/skewness of a run as CSV");
  std::string manifest_path;
  stats->add_option("manifest", manifest_path, "Run manifest (JSON lines)")->required();
  stat_flags.attach(*stats);
  stats->add_option("--out", out_path, "Output CSV (default: stdout)");

  auto* eval = app.add_subcommand("eval", "Score a caption corpus");
  std::string corpus_path, metrics_list = "bleu1,bleu2,bleu3,bleu4,rouge_l,cider,spider",
                           spice_path;
  bool per_item = false;
  eval->add_option("corpus", corpus_path, "Corpus JSON lines")->required();
  eval->add_option("--metrics", metrics_list, "Comma-separated metric names")->capture_default_str();
  eval->add_option("--spice", spice_path, "JSON object of per-item SPICE scores");
  eval->add_flag("--per-item", per_item, "Include per-item CIDEr and ROUGE-L");
  eval->add_option("--out", out_path, "Output JSON (default: stdout)");

  auto* correlate = app.add_subcommand("correlate", "Correlate statistics with per-epoch scores");
  std::string stats_path, scores_path, method = "spearman", metric = "spider";
  correlate->add_option("stats", stats_path, "Stats CSV")->required();
  correlate->add_option("scores", scores_path, "Scores CSV (epoch,<metric>,...)")->required();
  correlate->add_option("--method", method, "Correlation method")
      ->check(CLI::IsMember({"spearman", "pearson", "both"}))
      ->capture_default_str();
  correlate->add_option("--metric", metric, "Score column to correlate against")
      ->capture_default_str();
  correlate->add_option("--out", out_path, "Output JSON (default: stdout)");

  auto* stopcheck = app.add_subcommand("stopcheck", "Stability-based training termination check");
  double epsilon = kDefaultStopEpsilon;
  int window = kDefaultStopWindow;
  stopcheck->add_option("stats", stats_path, "Stats CSV")->required();
  stopcheck->add_option("--epsilon", epsilon, "Largest tolerated epoch-to-epoch change")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  stopcheck->add_option("--window", window, "Number of consecutive stable deltas required")
      ->check(CLI::Range(2, 1 << 20))
      ->capture_default_str();

  auto* rank = app.add_subcommand("rank", "Rank encoders by feature statistics");
  std::vector<std::string> manifests;
  std::string statistic = "kurtosis", at = "final";
  rank->add_option("manifests", manifests, "One manifest per encoder")->required();
  rank->add_option("--statistic", statistic, "Ranking statistic")
      ->check(CLI::IsMember({"kurtosis", "skewness", "combined"}))
      ->capture_default_str();
  rank->add_option("--at", at, "final, best, or an epoch index")->capture_default_str();
  stat_flags.attach(*rank);
  rank->add_option("--out", out_path, "Output JSON (default: stdout)");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic run from a trajectory spec");
  std::string spec_path, dims = "16,12,64", out_dir;
  synth->add_option("spec", spec_path, "Trajectory spec JSON")->required();
  synth->add_option("--dims", dims, "Tensor shape T,B,C")->capture_default_str();
  synth->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Stats CSV, metrics, correlation and SVG charts");
  std::string run_dir, report_metric = "spider";
  report->add_option("run_dir", run_dir, "Directory holding manifest.jsonl")->required();
  report->add_option("--out-dir", out_dir, "Output directory (default: <run_dir>/report)");
  report->add_option("--metric", report_metric, "Score plotted on the right axis")
      ->capture_default_str();
  stat_flags.attach(*report);

  std::vector<const char*> argv{"featstat"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUserError;
  }

  try {
    if (stats->parsed()) return cmd_stats(manifest_path, stat_flags, out_path, out);
    if (eval->parsed()) {
      return cmd_eval(corpus_path, metrics_list, spice_path, out_path, per_item, out, err);
    }
    if (correlate->parsed()) {
      return cmd_correlate(stats_path, scores_path, method, metric, out_path, out);
    }
    if (stopcheck->parsed()) return cmd_stopcheck(stats_path, epsilon, window, out);
    if (rank->parsed()) return cmd_rank(manifests, statistic, at, stat_flags, out_path, out);
    if (synth->parsed()) return cmd_synth(spec_path, dims, out_dir, out);
    if (report->parsed()) return cmd_report(run_dir, out_dir, report_metric, stat_flags, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUserError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUserError;
  }
  return kExitUserError;
}

}  // namespace featstat::cli
