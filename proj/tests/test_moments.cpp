#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "featstat/error.hpp"
#include "featstat/moments.hpp"
#include "oracles.hpp"

using namespace featstat;

namespace {

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected featstat::Error";
  return Errc::IoError;
}

// Field comparison scaled by the natural magnitude of each central sum, so that
// near-zero third moments are not judged by a meaningless relative error.
void expect_close(const MomentAccumulator& a, const MomentAccumulator& b, double tol) {
  ASSERT_EQ(a.count(), b.count());
  const double n = static_cast<double>(a.count());
  const double sd = std::sqrt(std::max(a.m2(), b.m2()) / n);
  EXPECT_LE(std::abs(a.mean() - b.mean()), tol * (std::abs(b.mean()) + sd));
  EXPECT_LE(std::abs(a.m2() - b.m2()), tol * n * sd * sd);
  EXPECT_LE(std::abs(a.m3() - b.m3()), tol * n * sd * sd * sd);
  EXPECT_LE(std::abs(a.m4() - b.m4()), tol * n * sd * sd * sd * sd);
}

const std::vector<double> kOneToFive{1, 2, 3, 4, 5};

}  // namespace

TEST(Moments, EmptyAccumulator) {
  const MomentAccumulator acc;
  EXPECT_EQ(acc.count(), 0u);
  EXPECT_EQ(acc.mean(), 0.0);
  EXPECT_EQ(acc.m2(), 0.0);
  EXPECT_EQ(acc.m3(), 0.0);
  EXPECT_EQ(acc.m4(), 0.0);
}

TEST(Moments, SingleElement) {
  MomentAccumulator acc;
  acc.add(5.0);
  EXPECT_EQ(acc.count(), 1u);
  EXPECT_EQ(acc.mean(), 5.0);
  EXPECT_EQ(acc.m2(), 0.0);
  EXPECT_EQ(acc.m3(), 0.0);
  EXPECT_EQ(acc.m4(), 0.0);
}

TEST(Moments, OneToFiveMatchesTwoPass) {
  const auto ref = oracle::two_pass(kOneToFive);
  // Frozen from the two-pass oracle: mean 3, M2 10, M3 0, M4 34.
  ASSERT_EQ(static_cast<double>(ref.m2), 10.0);
  ASSERT_EQ(static_cast<double>(ref.m4), 34.0);
  const MomentAccumulator acc = accumulate(kOneToFive);
  EXPECT_DOUBLE_EQ(acc.mean(), 3.0);
  EXPECT_DOUBLE_EQ(acc.m2(), 10.0);
  EXPECT_NEAR(acc.m3(), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(acc.m4(), 34.0);
}

TEST(Moments, NonFiniteInputRejected) {
  MomentAccumulator acc;
  EXPECT_EQ(error_of([&] { acc.add(std::numeric_limits<double>::quiet_NaN()); }),
            Errc::NonFiniteInput);
  EXPECT_EQ(error_of([&] { acc.add(std::numeric_limits<double>::infinity()); }),
            Errc::NonFiniteInput);
  EXPECT_EQ(acc.count(), 0u);
}

TEST(Moments, KurtosisDefinitionsOnOneToFive) {
  // Two-pass oracle: m2 = 2, m4 = 6.8, beta2 = 1.7.
  EXPECT_NEAR(oracle::beta2(kOneToFive), 1.7, 1e-15);
  const MomentAccumulator acc = accumulate(kOneToFive);
  EXPECT_NEAR(kurtosis(acc, KurtosisKind::PearsonBeta2), 1.7, 1e-12);
  EXPECT_NEAR(kurtosis(acc, KurtosisKind::FisherExcess), -1.3, 1e-12);
}

TEST(Moments, SymmetricSampleHasZeroSkewness) {
  const MomentAccumulator acc = accumulate(kOneToFive);
  EXPECT_NEAR(skewness(acc, SkewnessKind::BiasedG1), 0.0, 1e-12);
  EXPECT_NEAR(skewness(acc, SkewnessKind::SampleStd), 0.0, 1e-12);
}

TEST(Moments, BiasedSkewnessOfZeroZeroZeroOne) {
  const std::vector<double> xs{0, 0, 0, 1};
  const double expected = 2.0 / std::sqrt(3.0);
  EXPECT_NEAR(oracle::g1(xs), expected, 1e-15);
  EXPECT_NEAR(skewness(accumulate(xs), SkewnessKind::BiasedG1), expected, 1e-12);
  EXPECT_NEAR(skewness(accumulate(xs), SkewnessKind::SampleStd), oracle::sample_std_skew(xs), 1e-12);
}

TEST(Moments, ConstantSampleIsZeroVariance) {
  const MomentAccumulator acc = accumulate(std::vector<double>{7, 7, 7});
  EXPECT_EQ(error_of([&] { kurtosis(acc, KurtosisKind::PearsonBeta2); }), Errc::ZeroVariance);
  EXPECT_EQ(error_of([&] { skewness(acc, SkewnessKind::BiasedG1); }), Errc::ZeroVariance);
}

TEST(Moments, InsufficientCount) {
  MomentAccumulator one;
  one.add(1.0);
  EXPECT_EQ(error_of([&] { kurtosis(one, KurtosisKind::FisherExcess); }), Errc::InsufficientCount);
  const MomentAccumulator two = accumulate(std::vector<double>{1.0, 2.0});
  EXPECT_NO_THROW(skewness(two, SkewnessKind::BiasedG1));
  EXPECT_EQ(error_of([&] { skewness(two, SkewnessKind::SampleStd); }), Errc::InsufficientCount);
}

TEST(Moments, DefaultDefinitionIsExcessAndBiased) {
  const StatDefinition def;
  EXPECT_EQ(def.kurtosis, KurtosisKind::FisherExcess);
  EXPECT_EQ(def.skewness, SkewnessKind::BiasedG1);
}

TEST(Moments, MergeConcatenation) {
  const MomentAccumulator a = accumulate(std::vector<double>{1, 2});
  const MomentAccumulator b = accumulate(std::vector<double>{3, 4, 5});
  expect_close(MomentAccumulator::merge(a, b), accumulate(kOneToFive), 1e-12);
}

TEST(Moments, MergeWithEmptyIsIdentity) {
  const MomentAccumulator a = accumulate(std::vector<double>{1.5, -2.0, 9.25});
  const MomentAccumulator m = MomentAccumulator::merge(MomentAccumulator{}, a);
  EXPECT_EQ(m.count(), a.count());
  EXPECT_EQ(m.mean(), a.mean());
  EXPECT_EQ(m.m2(), a.m2());
  EXPECT_EQ(m.m3(), a.m3());
  EXPECT_EQ(m.m4(), a.m4());
}

TEST(Moments, SkewnessSignFlipsUnderNegation) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> xs(500), neg(500);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = ex(rng);
    neg[i] = -xs[i];
  }
  for (const auto kind : {SkewnessKind::BiasedG1, SkewnessKind::SampleStd}) {
    EXPECT_NEAR(skewness(accumulate(neg), kind), -skewness(accumulate(xs), kind), 1e-12);
  }
}

// Property: streaming statistics agree with the two-pass oracle.
TEST(MomentsProperty, StreamingMatchesTwoPass) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> len(10, 5000);
  std::uniform_real_distribution<double> log_scale(-6, 6);
  std::gamma_distribution<double> gamma(2.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double scale = std::pow(10.0, log_scale(rng));
    const double shift = scale * std::uniform_real_distribution<double>(-10, 10)(rng);
    std::vector<double> xs(len(rng));
    for (double& x : xs) x = shift + scale * gamma(rng);
    const MomentAccumulator acc = accumulate(xs);
    const double k = kurtosis(acc, KurtosisKind::PearsonBeta2);
    const double s = skewness(acc, SkewnessKind::BiasedG1);
    EXPECT_LE(std::abs(k - oracle::beta2(xs)), 1e-9 * std::abs(oracle::beta2(xs)));
    EXPECT_LE(std::abs(s - oracle::g1(xs)), 1e-9 * std::max(1.0, std::abs(oracle::g1(xs))));
  }
}

TEST(MomentsProperty, MergeAssociativeAndCommutative) {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> normal(4.0, 2.5);
  std::uniform_int_distribution<int> len(1, 400);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> xa(len(rng)), xb(len(rng)), xc(len(rng));
    for (auto* v : {&xa, &xb, &xc}) {
      for (double& x : *v) x = normal(rng);
    }
    const auto a = accumulate(xa), b = accumulate(xb), c = accumulate(xc);
    expect_close((a + b) + c, a + (b + c), 1e-9);
    expect_close(a + b, b + a, 1e-9);
  }
}

TEST(MomentsProperty, LocationScaleInvariance) {
  std::mt19937_64 rng(55);
  std::lognormal_distribution<double> lognormal(0.0, 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> xs(300);
    for (double& x : xs) x = lognormal(rng);
    const double a = (trial % 2 ? -1.0 : 1.0) * std::uniform_real_distribution<double>(0.1, 50)(rng);
    const double b = std::uniform_real_distribution<double>(-100, 100)(rng);
    std::vector<double> ys(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = a * xs[i] + b;
    const auto ax = accumulate(xs), ay = accumulate(ys);
    const double kx = kurtosis(ax, KurtosisKind::PearsonBeta2);
    EXPECT_LE(std::abs(kurtosis(ay, KurtosisKind::PearsonBeta2) - kx), 1e-9 * kx);
    const double sx = skewness(ax, SkewnessKind::BiasedG1);
    EXPECT_LE(std::abs(skewness(ay, SkewnessKind::BiasedG1) - std::copysign(1.0, a) * sx),
              1e-9 * std::max(1.0, std::abs(sx)));
  }
}

TEST(MomentsProperty, InvariantsHoldAfterUpdates) {
  std::mt19937_64 rng(8);
  std::student_t_distribution<double> t(3.0);
  MomentAccumulator acc;
  for (int i = 0; i < 10000; ++i) {
    acc.add(t(rng));
    ASSERT_GE(acc.m2(), 0.0);
    ASSERT_GE(acc.m4(), -1e-12 * acc.m4());
  }
}
