#include "featstat/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <sstream>

#include "featstat/error.hpp"

namespace featstat {
namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(Errc::LengthMismatch, "series lengths differ (" + std::to_string(x.size()) +
                                          " vs " + std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw Error(Errc::InsufficientCount, "need at least two points");
}

double mean(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::ConstantSeries, "series is constant");
  const double r = sxy / std::sqrt(sxx * syy);
  return {CorrelationMethod::Pearson, std::clamp(r, -1.0, 1.0), x.size()};
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  CorrelationResult r = pearson(rx, ry);
  r.method = CorrelationMethod::Spearman;
  return r;
}

CorrelationResult correlate(std::span<const double> x, std::span<const double> y,
                            CorrelationMethod method) {
  return method == CorrelationMethod::Pearson ? pearson(x, y) : spearman(x, y);
}

RunCorrelation correlate_run(const StatTrajectory& trajectory, const ScoreSeries& scores,
                             CorrelationMethod method) {
  std::map<std::int64_t, double> by_epoch(scores.begin(), scores.end());
  std::vector<double> kurt, skew, score;
  for (const auto& e : trajectory.epochs) {
    const auto it = by_epoch.find(e.epoch);
    if (it == by_epoch.end()) continue;
    kurt.push_back(e.kurtosis);
    skew.push_back(e.skewness);
    score.push_back(it->second);
  }
  if (score.size() < 2) {
    throw Error(Errc::InsufficientOverlap, "statistics and scores share " +
                                               std::to_string(score.size()) +
                                               " epoch(s); at least 2 are needed");
  }
  return {correlate(kurt, score, method), correlate(skew, score, method)};
}

ScoreSeries scores_from_manifest(const RunManifest& manifest, const std::string& metric) {
  ScoreSeries out;
  for (const auto& entry : manifest.entries) {
    if (const auto s = entry.score(metric)) out.emplace_back(entry.epoch, *s);
  }
  return out;
}

ScoreSeries read_scores_csv(std::istream& in, const std::string& metric) {
  ScoreSeries out;
  std::string line;
  std::size_t line_no = 0;
  int col_epoch = -1, col_metric = -1;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    for (std::size_t start = 0;;) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!header_seen) {
      for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
        if (cells[i] == "epoch") col_epoch = i;
        if (cells[i] == metric) col_metric = i;
      }
      if (col_epoch < 0 || col_metric < 0) {
        throw Error(Errc::MalformedLine,
                    "scores CSV header must contain \"epoch\" and \"" + metric + "\" columns");
      }
      header_seen = true;
      continue;
    }
    const auto bad = [&](const std::string& why) {
      return Error(Errc::MalformedLine, "scores CSV line " + std::to_string(line_no) + ": " + why);
    };
    if (static_cast<int>(cells.size()) <= std::max(col_epoch, col_metric)) {
      throw bad("too few columns");
    }
    if (cells[col_metric].empty()) continue;  // metric not evaluated at this epoch
    try {
      std::size_t used = 0;
      const std::int64_t epoch = std::stoll(cells[col_epoch], &used);
      if (used != cells[col_epoch].size()) throw bad("epoch is not an integer");
      const double value = std::stod(cells[col_metric], &used);
      if (used != cells[col_metric].size()) throw bad("score is not a number");
      out.emplace_back(epoch, value);
    } catch (const std::logic_error&) {
      throw bad("unparsable value");
    }
  }
  if (!header_seen) throw Error(Errc::MalformedLine, "scores CSV is empty");
  return out;
}

// ---------------------------------------------------------------------------

std::vector<RankedModel> order_descending(std::vector<RankedModel> models) {
  std::sort(models.begin(), models.end(), [](const RankedModel& a, const RankedModel& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.encoder_tag < b.encoder_tag;
  });
  return models;
}

namespace {

double pick(const StatTrajectory& trajectory, EpochSelector at, bool kurtosis) {
  const auto value = [&](const EpochStat& e) { return kurtosis ? e.kurtosis : e.skewness; };
  switch (at.kind) {
    case EpochSelector::Kind::Final:
      return value(trajectory.epochs.back());
    case EpochSelector::Kind::Best: {
      double best = value(trajectory.epochs.front());
      for (const auto& e : trajectory.epochs) best = std::max(best, value(e));
      return best;
    }
    case EpochSelector::Kind::Index:
      if (at.index >= trajectory.epochs.size()) {
        throw Error(Errc::InvalidArgument, "epoch index " + std::to_string(at.index) +
                                               " is past the end of a " +
                                               std::to_string(trajectory.epochs.size()) +
                                               "-epoch trajectory");
      }
      return value(trajectory.epochs[at.index]);
  }
  return 0.0;
}

std::vector<double> z_scores(const std::vector<double>& xs) {
  std::vector<double> z(xs.size(), 0.0);
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  if (*lo == *hi) return z;
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) z[i] = (xs[i] - m) / sd;
  return z;
}

}  // namespace

ModelRanking rank_models(const std::vector<Candidate>& candidates, EpochSelector at,
                         RankStatistic statistic) {
  if (candidates.empty()) throw Error(Errc::EmptyCandidateList, "no candidates to rank");
  for (const auto& c : candidates) {
    if (c.trajectory.epochs.empty()) {
      throw Error(Errc::InvalidArgument, "candidate \"" + c.encoder_tag + "\" has no epochs");
    }
  }

  std::vector<double> values;
  values.reserve(candidates.size());
  if (statistic == RankStatistic::Combined) {
    std::vector<double> kurt, skew;
    for (const auto& c : candidates) {
      kurt.push_back(pick(c.trajectory, at, true));
      skew.push_back(pick(c.trajectory, at, false));
    }
    const auto zk = z_scores(kurt);
    const auto zs = z_scores(skew);
    // snapped to a 1e-12 grid
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      values.push_back(std::round((zk[i] + zs[i]) / 2.0 * 1e12) / 1e12);
    }
  } else {
    for (const auto& c : candidates) {
      values.push_back(pick(c.trajectory, at, statistic == RankStatistic::Kurtosis));
    }
  }

  std::vector<RankedModel> models;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    models.push_back({candidates[i].encoder_tag, values[i]});
  }
  return {statistic, order_descending(std::move(models))};
}

// ---------------------------------------------------------------------------

StopDecision stop_check(std::span<const double> kurtosis, std::span<const double> skewness,
                        double epsilon, int window) {
  if (window < 2) throw Error(Errc::InvalidArgument, "stop window must be >= 2");
  if (!(epsilon > 0.0)) throw Error(Errc::InvalidArgument, "stop epsilon must be > 0");
  if (kurtosis.size() != skewness.size()) {
    throw Error(Errc::LengthMismatch, "kurtosis and skewness series differ in length");
  }

  StopDecision decision;
  decision.window = window;
  decision.epsilon = epsilon;
  const auto w = static_cast<std::size_t>(window);

  // Length of the current run of consecutive deltas within epsilon, ending at i.
  std::size_t stable_run = 0;
  for (std::size_t i = 1; i < kurtosis.size(); ++i) {
    const bool stable = std::abs(kurtosis[i] - kurtosis[i - 1]) <= epsilon &&
                        std::abs(skewness[i] - skewness[i - 1]) <= epsilon;
    stable_run = stable ? stable_run + 1 : 0;
    if (i >= w && stable_run >= w) {
      decision.should_stop = true;
      decision.stop_index = i;
      return decision;
    }
  }
  return decision;
}

StopDecision stop_check(const StatTrajectory& trajectory, double epsilon, int window) {
  StopDecision d = stop_check(trajectory.kurtosis_series(), trajectory.skewness_series(), epsilon,
                              window);
  if (d.stop_index) d.stop_epoch = trajectory.epochs[*d.stop_index].epoch;
  return d;
}

}  // namespace featstat
