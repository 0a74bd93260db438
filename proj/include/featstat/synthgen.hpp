#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "featstat/tensor_store.hpp"

namespace featstat {

/// Sinh-arcsinh transform of a standard normal:
///   X = sinh((asinh(Z) + epsilon) / delta)
/// epsilon controls asymmetry, delta tail weight (delta = 1, epsilon = 0 is the normal).
struct SinhArcsinh {
  double epsilon = 0.0;
  double delta = 1.0;

  double transform(double z) const;
};

struct ShapeMoments {
  double mean = 0.0;
  double variance = 1.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

/// Population moments of the sinh-arcsinh family in closed form (modified Bessel functions).
ShapeMoments sinh_arcsinh_moments(const SinhArcsinh& params);

inline constexpr int kSolverMaxIterations = 200;
inline constexpr double kSolverTolerance = 1e-6;

/// Finds sinh-arcsinh parameters with the requested population skewness and
/// excess kurtosis. Throws Error{InfeasibleTargets} when
/// excess_kurtosis < skew^2 - 2 and Error{SolverFailure} when the family cannot
/// reach the pair within the iteration budget.
SinhArcsinh solve_sinh_arcsinh(double target_skew, double target_excess_kurtosis);

/// `count` draws with the given population skewness and excess kurtosis,
/// standardized to zero mean and unit variance.
std::vector<double> sample_with_moments(double target_skew, double target_excess_kurtosis,
                                        std::size_t count, std::uint64_t seed);

enum class ScoreLink { MonotoneInKurtosis, MonotoneInSkewness, Independent };

struct TrajectorySpec {
  int epochs = 0;
  std::vector<double> kurtosis_path;  ///< target excess kurtosis per epoch
  std::vector<double> skewness_path;
  double noise_sigma = 0.0;
  ScoreLink score_link = ScoreLink::MonotoneInKurtosis;
  std::uint64_t seed = 0;
  std::string encoder_tag = "synthetic";

  void validate() const;
};

std::vector<double> linear_path(double from, double to, int count);

TrajectorySpec parse_trajectory_spec(const std::string& json_text);
TrajectorySpec load_trajectory_spec(const std::filesystem::path& path);

/// Synthetic scores live in [0, kSyntheticScoreCeiling].
inline constexpr double kSyntheticScoreCeiling = 0.35;

/// Default synthetic tensor shape; the batch size matches the reference training setup.
inline constexpr TensorShape kDefaultSynthShape{16, 12, 64};

/// Writes one f32 tensor per epoch plus `manifest.jsonl` into `out_dir` and
/// returns the manifest. Each epoch uses its own RNG stream derived from
/// (seed, epoch).
RunManifest generate_run(const TrajectorySpec& spec, TensorShape shape,
                         const std::filesystem::path& out_dir);

}  // namespace featstat
