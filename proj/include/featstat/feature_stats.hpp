#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "featstat/moments.hpp"
#include "featstat/tensor_store.hpp"

namespace featstat {

enum class TimeMode {
  PerFrame,     ///< statistic over the C channels of every (t, b), averaged over t
  FlattenTime,  ///< one statistic over all T*C values of each batch item
};

struct EpochStat {
  std::int64_t epoch = 0;
  double kurtosis = 0.0;
  double skewness = 0.0;
  std::vector<double> per_batch_kurtosis;
  std::vector<double> per_batch_skewness;
  /// (t, b) slices skipped because their variance was zero or they held non-finite values.
  std::uint64_t degenerate_frames = 0;
};

struct StatTrajectory {
  std::string encoder_tag;
  StatDefinition definition;
  std::vector<EpochStat> epochs;

  std::vector<double> kurtosis_series() const;
  std::vector<double> skewness_series() const;
  std::vector<std::int64_t> epoch_numbers() const;
};

/// Reduces one feature tensor to an epoch scalar: per-slice statistic along the
/// channel axis, averaged within each batch item, then averaged over the batch.
EpochStat epoch_statistic(const FeatureTensor& tensor, const StatDefinition& def = {},
                          TimeMode mode = TimeMode::PerFrame);

/// One EpochStat per manifest entry. tensor_store failures are rethrown tagged
/// with the failing epoch.
StatTrajectory run_trajectory(const RunManifest& manifest, const StatDefinition& def = {},
                              TimeMode mode = TimeMode::PerFrame,
                              ReadMode read_mode = ReadMode::Strict);

/// `epoch,kurtosis,skewness,degenerate_frames` with 9 significant digits.
void write_stats_csv(const StatTrajectory& trajectory, std::ostream& out);
StatTrajectory read_stats_csv(std::istream& in);

}  // namespace featstat
