#include "featstat/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "featstat/error.hpp"

namespace featstat {
namespace {

// Largest epsilon/delta explored by the solver; skewness has saturated well before it.
constexpr double kMaxShiftRatio = 12.0;
constexpr double kMinDelta = 0.15;
constexpr double kMaxDelta = 50.0;

/// E[sinh(q * asinh(Z))]-style Bessel term shared by all raw moments.
long double bessel_term(double q) {
  const double c = std::exp(0.25) / std::sqrt(8.0 * std::numbers::pi);
  const double a = std::abs((q + 1.0) / 2.0);
  const double b = std::abs((q - 1.0) / 2.0);
  return static_cast<long double>(c) *
         (static_cast<long double>(std::cyl_bessel_k(a, 0.25)) +
          static_cast<long double>(std::cyl_bessel_k(b, 0.25)));
}

struct BesselTerms {
  long double p1, p2, p3, p4;

  explicit BesselTerms(double delta)
      : p1(bessel_term(1.0 / delta)),
        p2(bessel_term(2.0 / delta)),
        p3(bessel_term(3.0 / delta)),
        p4(bessel_term(4.0 / delta)) {}
};

ShapeMoments moments_from(const BesselTerms& p, double epsilon, double delta) {
  const long double a = static_cast<long double>(epsilon) / delta;
  const long double r1 = std::sinh(a) * p.p1;
  const long double r2 = 0.5L * (std::cosh(2 * a) * p.p2 - 1.0L);
  const long double r3 = 0.25L * (std::sinh(3 * a) * p.p3 - 3.0L * std::sinh(a) * p.p1);
  const long double r4 =
      0.125L * (std::cosh(4 * a) * p.p4 - 4.0L * std::cosh(2 * a) * p.p2 + 3.0L);

  const long double var = r2 - r1 * r1;
  const long double c3 = r3 - 3 * r1 * r2 + 2 * r1 * r1 * r1;
  const long double c4 = r4 - 4 * r1 * r3 + 6 * r1 * r1 * r2 - 3 * r1 * r1 * r1 * r1;

  ShapeMoments m;
  m.mean = static_cast<double>(r1);
  m.variance = static_cast<double>(var);
  m.skewness = static_cast<double>(c3 / std::pow(var, 1.5L));
  m.excess_kurtosis = static_cast<double>(c4 / (var * var) - 3.0L);
  return m;
}

/// Epsilon in [0, cap] whose skewness equals `target` (>= 0) at fixed delta.
double solve_shift(const BesselTerms& p, double delta, double target, double cap) {
  double lo = 0.0, hi = cap;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (moments_from(p, mid, delta).skewness < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> parse_path(const nlohmann::json& node, int epochs, const char* name) {
  if (node.is_array()) return node.get<std::vector<double>>();
  if (node.is_object() && node.contains("from") && node.contains("to")) {
    return linear_path(node.at("from").get<double>(), node.at("to").get<double>(), epochs);
  }
  throw Error(Errc::InvalidArgument,
              std::string("\"") + name + "\" must be an array or {\"from\":..,\"to\":..}");
}

ScoreLink parse_link(const std::string& s) {
  if (s == "monotone-in-kurtosis") return ScoreLink::MonotoneInKurtosis;
  if (s == "monotone-in-skewness") return ScoreLink::MonotoneInSkewness;
  if (s == "independent") return ScoreLink::Independent;
  throw Error(Errc::InvalidArgument, "unknown score_link \"" + s + "\"");
}

}  // namespace

double SinhArcsinh::transform(double z) const {
  return std::sinh((std::asinh(z) + epsilon) / delta);
}

ShapeMoments sinh_arcsinh_moments(const SinhArcsinh& params) {
  return moments_from(BesselTerms(params.delta), params.epsilon, params.delta);
}

SinhArcsinh solve_sinh_arcsinh(double target_skew, double target_excess_kurtosis) {
  if (!std::isfinite(target_skew) || !std::isfinite(target_excess_kurtosis)) {
    throw Error(Errc::InfeasibleTargets, "moment targets must be finite");
  }
  if (target_excess_kurtosis < target_skew * target_skew - 2.0) {
    throw Error(Errc::InfeasibleTargets,
                "excess kurtosis " + std::to_string(target_excess_kurtosis) +
                    " is below skew^2 - 2 = " + std::to_string(target_skew * target_skew - 2.0));
  }

  const double sign = target_skew < 0.0 ? -1.0 : 1.0;
  const double skew = std::abs(target_skew);

  // Along the curve of matched skewness, kurtosis falls as delta grows, so
  // bisect on log(delta).
  double lo = std::log(kMinDelta);
  double hi = std::log(kMaxDelta);
  for (int iter = 0; iter < kSolverMaxIterations; ++iter) {
    const double log_delta = 0.5 * (lo + hi);
    const double delta = std::exp(log_delta);
    const BesselTerms p(delta);
    const double cap = kMaxShiftRatio * delta;

    if (moments_from(p, cap, delta).skewness < skew) {
      hi = log_delta;
    } else {
      const double epsilon = solve_shift(p, delta, skew, cap);
      const ShapeMoments m = moments_from(p, epsilon, delta);
      if (std::abs(m.excess_kurtosis - target_excess_kurtosis) <= kSolverTolerance &&
          std::abs(m.skewness - skew) <= kSolverTolerance) {
        return {sign * epsilon, delta};
      }
      if (m.excess_kurtosis > target_excess_kurtosis) {
        lo = log_delta;
      } else {
        hi = log_delta;
      }
    }
    if (hi - lo < 1e-15) break;
  }
  throw Error(Errc::SolverFailure, "no sinh-arcsinh parameters reach skewness " +
                                       std::to_string(target_skew) + ", excess kurtosis " +
                                       std::to_string(target_excess_kurtosis));
}

namespace {

// Inverse standard normal CDF: Acklam's rational approximation polished with one Halley step.
double normal_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - p_low) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

// Stratified draws: one uniform per equal-probability stratum of the normal base, then shuffled.
std::vector<double> draw(const SinhArcsinh& params, std::size_t count, std::mt19937_64& rng) {
  const ShapeMoments m = sinh_arcsinh_moments(params);
  const double sd = std::sqrt(m.variance);
  std::uniform_real_distribution<double> unit;
  const double n = static_cast<double>(count);
  constexpr double kTiny = std::numeric_limits<double>::min();
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = std::clamp((static_cast<double>(i) + unit(rng)) / n, kTiny, 1.0 - 0x1p-53);
    out[i] = (params.transform(normal_quantile(u)) - m.mean) / sd;
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

std::vector<double> sample_with_moments(double target_skew, double target_excess_kurtosis,
                                        std::size_t count, std::uint64_t seed) {
  const SinhArcsinh params = solve_sinh_arcsinh(target_skew, target_excess_kurtosis);
  std::mt19937_64 rng(seed);
  return draw(params, count, rng);
}

// ---------------------------------------------------------------------------

void TrajectorySpec::validate() const {
  if (epochs < 1) throw Error(Errc::InvalidArgument, "spec needs at least one epoch");
  if (static_cast<int>(kurtosis_path.size()) != epochs ||
      static_cast<int>(skewness_path.size()) != epochs) {
    throw Error(Errc::InvalidArgument, "kurtosis_path and skewness_path must have one value per epoch");
  }
  if (!(noise_sigma >= 0.0)) throw Error(Errc::InvalidArgument, "noise_sigma must be >= 0");
}

std::vector<double> linear_path(double from, double to, int count) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    out.push_back(count == 1 ? from : from + (to - from) * i / (count - 1));
  }
  return out;
}

TrajectorySpec parse_trajectory_spec(const std::string& json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::MalformedLine, std::string("trajectory spec: ") + e.what());
  }
  try {
    TrajectorySpec spec;
    spec.epochs = doc.at("epochs").get<int>();
    spec.kurtosis_path = parse_path(doc.at("kurtosis_path"), spec.epochs, "kurtosis_path");
    spec.skewness_path = parse_path(doc.at("skewness_path"), spec.epochs, "skewness_path");
    spec.noise_sigma = doc.value("noise_sigma", 0.0);
    spec.score_link = parse_link(doc.value("score_link", std::string("monotone-in-kurtosis")));
    spec.seed = doc.value("seed", std::uint64_t{0});
    spec.encoder_tag = doc.value("encoder", std::string("synthetic"));
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("trajectory spec: ") + e.what());
  }
}

TrajectorySpec load_trajectory_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open trajectory spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trajectory_spec(ss.str());
}

RunManifest generate_run(const TrajectorySpec& spec, TensorShape shape,
                         const std::filesystem::path& out_dir) {
  spec.validate();
  if (shape.time == 0 || shape.batch == 0 || shape.channels == 0) {
    throw Error(Errc::InvalidShape, "tensor dimensions must all be >= 1");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  const auto& linked_path =
      spec.score_link == ScoreLink::MonotoneInSkewness ? spec.skewness_path : spec.kurtosis_path;
  const auto [min_it, max_it] = std::minmax_element(linked_path.begin(), linked_path.end());
  const double center = 0.5 * (*min_it + *max_it);
  const double scale = *max_it > *min_it ? (*max_it - *min_it) / 4.0 : 1.0;

  const std::size_t count = static_cast<std::size_t>(shape.time * shape.batch * shape.channels);
  RunManifest manifest;
  manifest.base_dir = out_dir;
  for (int e = 0; e < spec.epochs; ++e) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed & 0xFFFFFFFFu),
                      static_cast<std::uint32_t>(spec.seed >> 32), static_cast<std::uint32_t>(e)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;

    const double kurt_target = spec.kurtosis_path[e] + spec.noise_sigma * normal(rng);
    const double skew_target = spec.skewness_path[e] + spec.noise_sigma * normal(rng);
    const double score_noise = spec.noise_sigma * normal(rng);
    const double independent = std::uniform_real_distribution<double>(0.0, 1.0)(rng);

    double score = 0.0;
    switch (spec.score_link) {
      case ScoreLink::MonotoneInKurtosis:
      case ScoreLink::MonotoneInSkewness: {
        const double linked =
            (spec.score_link == ScoreLink::MonotoneInKurtosis ? kurt_target : skew_target) +
            score_noise;
        score = kSyntheticScoreCeiling / (1.0 + std::exp(-(linked - center) / scale));
        break;
      }
      case ScoreLink::Independent:
        score = kSyntheticScoreCeiling * independent;
        break;
    }

    try {
      const SinhArcsinh params = solve_sinh_arcsinh(skew_target, kurt_target);
      FeatureTensor tensor(shape, draw(params, count, rng), Dtype::F32);
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04d.fst", e);
      write_tensor_file(tensor, out_dir / name);

      ManifestEntry entry;
      entry.epoch = e;
      entry.tensor_path = name;
      entry.encoder_tag = spec.encoder_tag;
      entry.scores = std::map<std::string, double>{{"spider", score}};
      manifest.entries.push_back(std::move(entry));
    } catch (const Error& err) {
      throw err.with_epoch(e);
    }
  }
  save_manifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

}  // namespace featstat
