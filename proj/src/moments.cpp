#include "featstat/moments.hpp"

#include <cmath>
#include <string>

#include "featstat/error.hpp"

namespace featstat {

void MomentAccumulator::add(double x) {
  if (!std::isfinite(x)) throw Error(Errc::NonFiniteInput, "non-finite sample value");
  const double n1 = static_cast<double>(n_);
  ++n_;
  const double n = static_cast<double>(n_);
  const double delta = x - mean_;
  const double delta_n = delta / n;
  const double delta_n2 = delta_n * delta_n;
  const double term1 = delta * delta_n * n1;
  mean_ += delta_n;
  m4_ += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2_ - 4.0 * delta_n * m3_;
  m3_ += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2_;
  m2_ += term1;
}

void MomentAccumulator::add(std::span<const double> xs) {
  for (double x : xs) add(x);
}

MomentAccumulator MomentAccumulator::merge(const MomentAccumulator& a, const MomentAccumulator& b) {
  if (a.n_ == 0) return b;
  if (b.n_ == 0) return a;

  MomentAccumulator out;
  out.n_ = a.n_ + b.n_;
  const double na = static_cast<double>(a.n_);
  const double nb = static_cast<double>(b.n_);
  const double n = static_cast<double>(out.n_);
  const double delta = b.mean_ - a.mean_;
  const double delta2 = delta * delta;
  const double delta3 = delta2 * delta;
  const double delta4 = delta2 * delta2;

  out.mean_ = a.mean_ + delta * nb / n;
  out.m2_ = a.m2_ + b.m2_ + delta2 * na * nb / n;
  out.m3_ = a.m3_ + b.m3_ + delta3 * na * nb * (na - nb) / (n * n) +
            3.0 * delta * (na * b.m2_ - nb * a.m2_) / n;
  out.m4_ = a.m4_ + b.m4_ + delta4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
            6.0 * delta2 * (na * na * b.m2_ + nb * nb * a.m2_) / (n * n) +
            4.0 * delta * (na * b.m3_ - nb * a.m3_) / n;
  return out;
}

MomentAccumulator& MomentAccumulator::operator+=(const MomentAccumulator& other) {
  *this = merge(*this, other);
  return *this;
}

MomentAccumulator accumulate(std::span<const double> xs) {
  MomentAccumulator acc;
  acc.add(xs);
  return acc;
}

namespace {

void require_count(const MomentAccumulator& acc, std::uint64_t minimum) {
  if (acc.count() < minimum) {
    throw Error(Errc::InsufficientCount, "need at least " + std::to_string(minimum) +
                                             " samples, have " + std::to_string(acc.count()));
  }
}

void require_variance(const MomentAccumulator& acc) {
  if (!(acc.population_variance() >= kZeroVarianceThreshold)) {
    throw Error(Errc::ZeroVariance, "sample variance is zero");
  }
}

}  // namespace

double kurtosis(const MomentAccumulator& acc, KurtosisKind kind) {
  require_count(acc, 2);
  require_variance(acc);
  const double n = static_cast<double>(acc.count());
  const double m2 = acc.m2() / n;
  const double beta2 = (acc.m4() / n) / (m2 * m2);
  return kind == KurtosisKind::FisherExcess ? beta2 - 3.0 : beta2;
}

double skewness(const MomentAccumulator& acc, SkewnessKind kind) {
  const double n = static_cast<double>(acc.count());
  if (kind == SkewnessKind::BiasedG1) {
    require_count(acc, 2);
    require_variance(acc);
    const double m2 = acc.m2() / n;
    return (acc.m3() / n) / std::pow(m2, 1.5);
  }
  require_count(acc, 3);
  require_variance(acc);
  const double s = std::sqrt(acc.m2() / (n - 1.0));
  return acc.m3() / ((n - 1.0) * s * s * s);
}

}  // namespace featstat
