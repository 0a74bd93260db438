#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "featstat/error.hpp"
#include "featstat/feature_stats.hpp"
#include "oracles.hpp"

using namespace featstat;
namespace fs = std::filesystem;

namespace {

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n) {
  std::gamma_distribution<double> gamma(1.5, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = gamma(rng) - 1.0;
  return v;
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(FeatureStats, SingleSliceReducesToPlainStatistic) {
  const FeatureTensor t({1, 1, 5}, {1, 2, 3, 4, 5}, Dtype::F64);
  const StatDefinition def{KurtosisKind::PearsonBeta2, SkewnessKind::BiasedG1};
  const EpochStat s = epoch_statistic(t, def, TimeMode::PerFrame);
  EXPECT_NEAR(s.kurtosis, 1.7, 1e-12);
  EXPECT_NEAR(s.skewness, 0.0, 1e-12);
  EXPECT_EQ(s.per_batch_kurtosis.size(), 1u);
  EXPECT_EQ(s.degenerate_frames, 0u);
}

TEST(FeatureStats, AllSlicesConstantIsDegenerate) {
  const FeatureTensor t({2, 2, 4}, std::vector<double>(16, 3.0), Dtype::F64);
  try {
    epoch_statistic(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AllFramesDegenerate);
  }
}

TEST(FeatureStats, ChannelTooSmall) {
  const FeatureTensor t({3, 2, 1}, std::vector<double>(6, 1.0), Dtype::F64);
  try {
    epoch_statistic(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ChannelTooSmall);
  }
}

TEST(FeatureStats, DegenerateSlicesAreSkippedAndCounted) {
  // Batch 0: frame 0 constant, frame 1 = 1..4. Batch 1: both frames usable.
  std::vector<double> v{5, 5, 5, 5, /*b1*/ 1, 0, 0, 0,
                        1, 2, 3, 4, /*b1*/ 0, 0, 0, 2};
  const FeatureTensor t({2, 2, 4}, v, Dtype::F64);
  const StatDefinition def{KurtosisKind::PearsonBeta2, SkewnessKind::BiasedG1};
  const EpochStat s = epoch_statistic(t, def);
  EXPECT_EQ(s.degenerate_frames, 1u);
  const std::vector<double> ramp{1, 2, 3, 4}, spike1{1, 0, 0, 0}, spike2{0, 0, 0, 2};
  EXPECT_NEAR(s.per_batch_kurtosis[0], oracle::beta2(ramp), 1e-12);
  EXPECT_NEAR(s.per_batch_kurtosis[1], (oracle::beta2(spike1) + oracle::beta2(spike2)) / 2, 1e-12);
  EXPECT_LE(s.degenerate_frames, 4u);
}

TEST(FeatureStats, NonFiniteSlicesSkippedInLenientTensors) {
  std::vector<double> v{1, 2, 3, 4, std::nan(""), 1, 2, 3};
  const FeatureTensor t({2, 1, 4}, v, Dtype::F64);
  const EpochStat s = epoch_statistic(t);
  EXPECT_EQ(s.degenerate_frames, 1u);
  const std::vector<double> ramp{1, 2, 3, 4};
  EXPECT_NEAR(s.kurtosis, oracle::excess_kurtosis(ramp), 1e-12);
}

TEST(FeatureStats, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(17);
  const std::size_t T = 3, B = 2, C = 64;
  const auto values = random_values(rng, T * B * C);
  const FeatureTensor t({T, B, C}, values, Dtype::F64);
  const EpochStat s = epoch_statistic(t, {});
  EXPECT_LE(relative_error(s.kurtosis, oracle::triple_loop(values, T, B, C, oracle::excess_kurtosis)),
            1e-9);
  EXPECT_LE(relative_error(s.skewness, oracle::triple_loop(values, T, B, C, oracle::g1)), 1e-9);

  const StatDefinition alt{KurtosisKind::PearsonBeta2, SkewnessKind::SampleStd};
  const EpochStat s2 = epoch_statistic(t, alt);
  EXPECT_LE(relative_error(s2.kurtosis, oracle::triple_loop(values, T, B, C, oracle::beta2)), 1e-9);
  EXPECT_LE(relative_error(s2.skewness, oracle::triple_loop(values, T, B, C, oracle::sample_std_skew)),
            1e-9);
}

TEST(FeatureStats, FlattenTimeUsesAllTimeChannelValues) {
  std::mt19937_64 rng(4);
  const std::size_t T = 4, B = 3, C = 8;
  const auto values = random_values(rng, T * B * C);
  const FeatureTensor t({T, B, C}, values, Dtype::F64);
  const EpochStat s = epoch_statistic(t, {}, TimeMode::FlattenTime);
  double expected = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> flat;
    for (std::size_t tt = 0; tt < T; ++tt) {
      for (std::size_t c = 0; c < C; ++c) flat.push_back(values[tt * B * C + b * C + c]);
    }
    expected += oracle::excess_kurtosis(flat) / B;
  }
  EXPECT_LE(relative_error(s.kurtosis, expected), 1e-9);
}

TEST(FeatureStatsProperty, PerFrameWithSingleFrameEqualsFlattenTime) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t B = 1 + trial % 5, C = 2 + trial;
    const FeatureTensor t({1, B, C}, random_values(rng, B * C), Dtype::F64);
    const EpochStat a = epoch_statistic(t, {}, TimeMode::PerFrame);
    const EpochStat b = epoch_statistic(t, {}, TimeMode::FlattenTime);
    EXPECT_EQ(a.kurtosis, b.kurtosis);
    EXPECT_EQ(a.skewness, b.skewness);
  }
}

TEST(FeatureStatsProperty, EpochScalarIsMeanOfBatchLists) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t T = 1 + trial % 4, B = 1 + trial % 7, C = 16;
    const FeatureTensor t({T, B, C}, random_values(rng, T * B * C), Dtype::F64);
    const EpochStat s = epoch_statistic(t);
    ASSERT_EQ(s.per_batch_kurtosis.size(), B);
    const double mk = std::accumulate(s.per_batch_kurtosis.begin(), s.per_batch_kurtosis.end(), 0.0) / B;
    const double ms = std::accumulate(s.per_batch_skewness.begin(), s.per_batch_skewness.end(), 0.0) / B;
    EXPECT_LE(std::abs(s.kurtosis - mk), 1e-12 * std::max(1.0, std::abs(mk)));
    EXPECT_LE(std::abs(s.skewness - ms), 1e-12 * std::max(1.0, std::abs(ms)));
  }
}

TEST(FeatureStatsProperty, AffineInvariance) {
  std::mt19937_64 rng(12);
  const std::size_t T = 3, B = 4, C = 32;
  const auto values = random_values(rng, T * B * C);
  std::vector<double> scaled(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) scaled[i] = 3.5 * values[i] - 17.0;
  const EpochStat a = epoch_statistic(FeatureTensor({T, B, C}, values, Dtype::F64));
  const EpochStat b = epoch_statistic(FeatureTensor({T, B, C}, scaled, Dtype::F64));
  EXPECT_LE(relative_error(b.kurtosis, a.kurtosis), 1e-9);
  EXPECT_LE(relative_error(b.skewness, a.skewness), 1e-9);
}

TEST(FeatureStatsProperty, BatchPermutationInvariance) {
  std::mt19937_64 rng(99);
  const std::size_t T = 3, B = 5, C = 16;
  const auto values = random_values(rng, T * B * C);
  const EpochStat base = epoch_statistic(FeatureTensor({T, B, C}, values, Dtype::F64));
  std::vector<std::size_t> perm(B);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> permuted(values.size());
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
          permuted[t * B * C + b * C + c] = values[t * B * C + perm[b] * C + c];
        }
      }
    }
    const EpochStat p = epoch_statistic(FeatureTensor({T, B, C}, permuted, Dtype::F64));
    EXPECT_NEAR(p.kurtosis, base.kurtosis, 1e-12 * std::max(1.0, std::abs(base.kurtosis)));
    EXPECT_NEAR(p.skewness, base.skewness, 1e-12 * std::max(1.0, std::abs(base.skewness)));
  }
}

// ---------------------------------------------------------------------------

TEST(RunTrajectory, OneStatPerEpoch) {
  const fs::path dir = fresh_dir("featstat_traj");
  std::mt19937_64 rng(1);
  RunManifest m;
  m.base_dir = dir;
  for (int e : {0, 1, 2}) {
    const std::string name = "ep" + std::to_string(e) + ".fst";
    write_tensor_file(FeatureTensor({2, 3, 8}, random_values(rng, 48)), dir / name);
    m.entries.push_back({e, name, std::nullopt, "cnn6"});
  }
  save_manifest(m, dir / "manifest.jsonl");
  const StatTrajectory traj = run_trajectory(load_manifest(dir / "manifest.jsonl"));
  ASSERT_EQ(traj.epochs.size(), 3u);
  EXPECT_EQ(traj.epoch_numbers(), (std::vector<std::int64_t>{0, 1, 2}));
  EXPECT_EQ(traj.encoder_tag, "cnn6");
}

TEST(RunTrajectory, TruncatedFileNamesEpoch) {
  const fs::path dir = fresh_dir("featstat_traj_trunc");
  std::mt19937_64 rng(2);
  RunManifest m;
  m.base_dir = dir;
  for (int e : {0, 1, 2}) {
    const std::string name = "ep" + std::to_string(e) + ".fst";
    write_tensor_file(FeatureTensor({2, 3, 8}, random_values(rng, 48)), dir / name);
    m.entries.push_back({e, name, std::nullopt, ""});
  }
  fs::resize_file(dir / "ep1.fst", fs::file_size(dir / "ep1.fst") - 10);
  try {
    run_trajectory(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TruncatedData);
    ASSERT_TRUE(e.epoch().has_value());
    EXPECT_EQ(*e.epoch(), 1);
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

TEST(StatsCsv, FormatAndRoundTrip) {
  StatTrajectory traj;
  traj.epochs.push_back({0, 1.0 / 3.0, -0.125, {}, {}, 2});
  traj.epochs.push_back({5, 12345.678901234, 2e-9, {}, {}, 0});
  std::stringstream buf;
  write_stats_csv(traj, buf);
  EXPECT_EQ(buf.str(),
            "epoch,kurtosis,skewness,degenerate_frames\n"
            "0,0.333333333,-0.125,2\n"
            "5,12345.6789,2e-09,0\n");
  const StatTrajectory back = read_stats_csv(buf);
  ASSERT_EQ(back.epochs.size(), 2u);
  EXPECT_EQ(back.epochs[1].epoch, 5);
  EXPECT_DOUBLE_EQ(back.epochs[0].skewness, -0.125);
}

TEST(StatsCsv, MalformedInput) {
  std::istringstream no_header("1,2,3\n");
  EXPECT_THROW(read_stats_csv(no_header), Error);
  std::istringstream bad_value("epoch,kurtosis,skewness\n0,abc,1\n");
  EXPECT_THROW(read_stats_csv(bad_value), Error);
  std::istringstream empty("");
  EXPECT_THROW(read_stats_csv(empty), Error);
}
