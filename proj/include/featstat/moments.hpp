#pragma once

#include <cstdint>
#include <span>

namespace featstat {

enum class KurtosisKind {
  PearsonBeta2,  ///< m4 / m2^2
  FisherExcess,  ///< m4 / m2^2 - 3
};

enum class SkewnessKind {
  BiasedG1,   ///< m3 / m2^1.5
  SampleStd,  ///< sum (x - mean)^3 / ((n - 1) s^3), s the n-1 sample standard deviation
};

struct StatDefinition {
  KurtosisKind kurtosis = KurtosisKind::FisherExcess;
  SkewnessKind skewness = SkewnessKind::BiasedG1;
};

/// Threshold on the population variance M2/n below which a sample is treated as constant.
inline constexpr double kZeroVarianceThreshold = 1e-30;

/// Running count, mean and central power sums M2, M3, M4 of a sample.
///
/// `add` uses the incremental central-moment recurrences and `merge` the
/// pairwise combination formulas, so accumulators over disjoint chunks can be
/// reduced in any order.
class MomentAccumulator {
 public:
  MomentAccumulator() = default;

  /// Throws Error{NonFiniteInput} for NaN/Inf.
  void add(double x);
  void add(std::span<const double> xs);

  static MomentAccumulator merge(const MomentAccumulator& a, const MomentAccumulator& b);
  MomentAccumulator& operator+=(const MomentAccumulator& other);

  std::uint64_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double m2() const noexcept { return m2_; }
  double m3() const noexcept { return m3_; }
  double m4() const noexcept { return m4_; }

  double population_variance() const noexcept { return n_ == 0 ? 0.0 : m2_ / n_; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
  double m4_ = 0.0;
};

inline MomentAccumulator operator+(MomentAccumulator a, const MomentAccumulator& b) {
  a += b;
  return a;
}

MomentAccumulator accumulate(std::span<const double> xs);

double kurtosis(const MomentAccumulator& acc, KurtosisKind kind);
double skewness(const MomentAccumulator& acc, SkewnessKind kind);

inline double kurtosis(const MomentAccumulator& acc, const StatDefinition& def) {
  return kurtosis(acc, def.kurtosis);
}
inline double skewness(const MomentAccumulator& acc, const StatDefinition& def) {
  return skewness(acc, def.skewness);
}

}  // namespace featstat
