#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace featstat {

enum class Errc {
  // tensor_store
  BadMagic,
  UnsupportedVersion,
  UnsupportedDtype,
  UnsupportedRank,
  InvalidShape,
  TruncatedData,
  NonFinite,
  DimOverflow,
  WriteFailure,
  MalformedLine,
  NonMonotonicEpochs,
  // moments
  NonFiniteInput,
  InsufficientCount,
  ZeroVariance,
  // feature_stats
  ChannelTooSmall,
  AllFramesDegenerate,
  // caption_metrics
  EmptyAfterTokenization,
  EmptyReferences,
  CorpusTooSmall,
  MissingSpice,
  // analysis
  LengthMismatch,
  ConstantSeries,
  InsufficientOverlap,
  EmptyCandidateList,
  InvalidArgument,
  // synthgen
  InfeasibleTargets,
  SolverFailure,
  // generic I/O
  IoError,
};

std::string_view errc_name(Errc code) noexcept;

/// Error raised by every featstat module. Carries a machine-checkable code and,
/// when the failure happened while processing a run, the epoch it belongs to.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }
  const std::optional<std::int64_t>& epoch() const noexcept { return epoch_; }

  /// Copy of this error tagged with the epoch being processed.
  Error with_epoch(std::int64_t epoch) const;

 private:
  Errc code_;
  std::optional<std::int64_t> epoch_;
};

}  // namespace featstat
