#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "featstat/feature_stats.hpp"

namespace featstat {

enum class CorrelationMethod { Pearson, Spearman };

struct CorrelationResult {
  CorrelationMethod method = CorrelationMethod::Pearson;
  double coefficient = 0.0;
  std::size_t n_points = 0;
};

CorrelationResult pearson(std::span<const double> x, std::span<const double> y);
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);
CorrelationResult correlate(std::span<const double> x, std::span<const double> y,
                            CorrelationMethod method);

/// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

/// Per-epoch metric values, e.g. SPIDEr at each evaluated epoch.
using ScoreSeries = std::vector<std::pair<std::int64_t, double>>;

struct RunCorrelation {
  CorrelationResult kurtosis;
  CorrelationResult skewness;
};

/// Correlates each statistic with the scores over the epochs present in both.
/// Throws Error{InsufficientOverlap} when fewer than two epochs are shared.
RunCorrelation correlate_run(const StatTrajectory& trajectory, const ScoreSeries& scores,
                             CorrelationMethod method);

/// Scores from the manifest entries carrying `metric`.
ScoreSeries scores_from_manifest(const RunManifest& manifest, const std::string& metric);

/// Scores CSV with an `epoch` column and one column per metric.
ScoreSeries read_scores_csv(std::istream& in, const std::string& metric);

// ---------------------------------------------------------------------------
// Model ranking.

enum class RankStatistic { Kurtosis, Skewness, Combined };

struct EpochSelector {
  enum class Kind { Final, Best, Index };
  Kind kind = Kind::Final;
  std::size_t index = 0;

  static EpochSelector final_epoch() { return {Kind::Final, 0}; }
  static EpochSelector best() { return {Kind::Best, 0}; }
  static EpochSelector at(std::size_t k) { return {Kind::Index, k}; }
};

struct RankedModel {
  std::string encoder_tag;
  double value = 0.0;
};

struct ModelRanking {
  RankStatistic statistic = RankStatistic::Kurtosis;
  std::vector<RankedModel> entries;
};

struct Candidate {
  std::string encoder_tag;
  StatTrajectory trajectory;
};

/// Orders candidates by the chosen statistic, highest first, ties by tag.
/// `Best` takes the maximum of each statistic over the run; `Combined` is the
/// mean of the kurtosis and skewness z-scores across candidates.
ModelRanking rank_models(const std::vector<Candidate>& candidates, EpochSelector at,
                         RankStatistic statistic);

/// Same ordering rule applied to precomputed (tag, value) pairs.
std::vector<RankedModel> order_descending(std::vector<RankedModel> models);

// ---------------------------------------------------------------------------
// Stability-based stopping rule.

inline constexpr double kDefaultStopEpsilon = 0.05;
inline constexpr int kDefaultStopWindow = 5;

struct StopDecision {
  bool should_stop = false;
  /// Index into the trajectory at which both statistics had been stable for `window` deltas.
  std::optional<std::size_t> stop_index;
  std::optional<std::int64_t> stop_epoch;
  int window = kDefaultStopWindow;
  double epsilon = kDefaultStopEpsilon;
};

/// First index i >= window at which the last `window` consecutive deltas of
/// BOTH series are within epsilon.
StopDecision stop_check(std::span<const double> kurtosis, std::span<const double> skewness,
                        double epsilon = kDefaultStopEpsilon, int window = kDefaultStopWindow);
StopDecision stop_check(const StatTrajectory& trajectory, double epsilon = kDefaultStopEpsilon,
                        int window = kDefaultStopWindow);

}  // namespace featstat
