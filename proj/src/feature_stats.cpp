#include "featstat/feature_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "featstat/error.hpp"

namespace featstat {
namespace {

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

struct SliceStat {
  bool usable = false;
  double kurtosis = 0.0;
  double skewness = 0.0;
};

SliceStat slice_statistic(const MomentAccumulator& acc, const StatDefinition& def) {
  if (acc.population_variance() < kZeroVarianceThreshold) return {};
  return {true, kurtosis(acc, def), skewness(acc, def)};
}

std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::vector<double> StatTrajectory::kurtosis_series() const {
  std::vector<double> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) out.push_back(e.kurtosis);
  return out;
}

std::vector<double> StatTrajectory::skewness_series() const {
  std::vector<double> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) out.push_back(e.skewness);
  return out;
}

std::vector<std::int64_t> StatTrajectory::epoch_numbers() const {
  std::vector<std::int64_t> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) out.push_back(e.epoch);
  return out;
}

EpochStat epoch_statistic(const FeatureTensor& tensor, const StatDefinition& def, TimeMode mode) {
  const TensorShape& shape = tensor.shape();
  if (shape.channels < 2) {
    throw Error(Errc::ChannelTooSmall, "channel axis must have at least 2 entries, has " +
                                           std::to_string(shape.channels));
  }

  EpochStat stat;
  stat.per_batch_kurtosis.reserve(shape.batch);
  stat.per_batch_skewness.reserve(shape.batch);

  for (std::uint64_t b = 0; b < shape.batch; ++b) {
    double kurt_sum = 0.0;
    double skew_sum = 0.0;
    std::uint64_t used = 0;

    if (mode == TimeMode::PerFrame) {
      for (std::uint64_t t = 0; t < shape.time; ++t) {
        const auto slice = tensor.channel_slice(t, b);
        if (!all_finite(slice)) {
          ++stat.degenerate_frames;
          continue;
        }
        const SliceStat s = slice_statistic(accumulate(slice), def);
        if (!s.usable) {
          ++stat.degenerate_frames;
          continue;
        }
        kurt_sum += s.kurtosis;
        skew_sum += s.skewness;
        ++used;
      }
    } else {
      MomentAccumulator acc;
      bool finite = true;
      for (std::uint64_t t = 0; t < shape.time && finite; ++t) {
        const auto slice = tensor.channel_slice(t, b);
        finite = all_finite(slice);
        if (finite) acc.add(slice);
      }
      const SliceStat s = finite ? slice_statistic(acc, def) : SliceStat{};
      if (s.usable) {
        kurt_sum = s.kurtosis;
        skew_sum = s.skewness;
        used = 1;
      } else {
        stat.degenerate_frames += shape.time;
      }
    }

    if (used == 0) {
      throw Error(Errc::AllFramesDegenerate,
                  "batch item " + std::to_string(b) + " has no slice with non-zero variance");
    }
    stat.per_batch_kurtosis.push_back(kurt_sum / static_cast<double>(used));
    stat.per_batch_skewness.push_back(skew_sum / static_cast<double>(used));
  }

  stat.kurtosis = mean_of(stat.per_batch_kurtosis);
  stat.skewness = mean_of(stat.per_batch_skewness);
  return stat;
}

StatTrajectory run_trajectory(const RunManifest& manifest, const StatDefinition& def, TimeMode mode,
                              ReadMode read_mode) {
  StatTrajectory trajectory;
  trajectory.encoder_tag = manifest.encoder_tag();
  trajectory.definition = def;
  trajectory.epochs.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    try {
      const FeatureTensor tensor = read_tensor_file(manifest.resolve(entry), read_mode);
      EpochStat stat = epoch_statistic(tensor, def, mode);
      stat.epoch = entry.epoch;
      trajectory.epochs.push_back(std::move(stat));
    } catch (const Error& e) {
      throw e.with_epoch(entry.epoch);
    }
  }
  return trajectory;
}

void write_stats_csv(const StatTrajectory& trajectory, std::ostream& out) {
  out << "epoch,kurtosis,skewness,degenerate_frames\n";
  for (const auto& e : trajectory.epochs) {
    out << e.epoch << ',' << format_g9(e.kurtosis) << ',' << format_g9(e.skewness) << ','
        << e.degenerate_frames << '\n';
  }
}

StatTrajectory read_stats_csv(std::istream& in) {
  StatTrajectory trajectory;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  int col_epoch = -1, col_kurt = -1, col_skew = -1, col_degen = -1;
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
        else if (cells[i] == "kurtosis") col_kurt = i;
        else if (cells[i] == "skewness") col_skew = i;
        else if (cells[i] == "degenerate_frames") col_degen = i;
      }
      if (col_epoch < 0 || col_kurt < 0 || col_skew < 0) {
        throw Error(Errc::MalformedLine,
                    "stats CSV header must contain epoch, kurtosis and skewness columns");
      }
      header_seen = true;
      continue;
    }
    const auto bad = [&](const std::string& why) {
      return Error(Errc::MalformedLine, "stats CSV line " + std::to_string(line_no) + ": " + why);
    };
    const int needed = std::max({col_epoch, col_kurt, col_skew, col_degen});
    if (static_cast<int>(cells.size()) <= needed) throw bad("too few columns");
    EpochStat stat;
    try {
      std::size_t used = 0;
      stat.epoch = std::stoll(cells[col_epoch], &used);
      if (used != cells[col_epoch].size()) throw bad("epoch is not an integer");
      stat.kurtosis = std::stod(cells[col_kurt], &used);
      if (used != cells[col_kurt].size()) throw bad("kurtosis is not a number");
      stat.skewness = std::stod(cells[col_skew], &used);
      if (used != cells[col_skew].size()) throw bad("skewness is not a number");
      if (col_degen >= 0) stat.degenerate_frames = std::stoull(cells[col_degen]);
    } catch (const std::logic_error&) {
      throw bad("unparsable value");
    }
    if (!trajectory.epochs.empty() && stat.epoch <= trajectory.epochs.back().epoch) {
      throw Error(Errc::NonMonotonicEpochs,
                  "stats CSV line " + std::to_string(line_no) + ": epochs must increase");
    }
    trajectory.epochs.push_back(std::move(stat));
  }
  if (!header_seen) throw Error(Errc::MalformedLine, "stats CSV is empty");
  return trajectory;
}

}  // namespace featstat
