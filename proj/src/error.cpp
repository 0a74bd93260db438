#include "featstat/error.hpp"

namespace featstat {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::UnsupportedDtype: return "UnsupportedDtype";
    case Errc::UnsupportedRank: return "UnsupportedRank";
    case Errc::InvalidShape: return "InvalidShape";
    case Errc::TruncatedData: return "TruncatedData";
    case Errc::NonFinite: return "NonFinite";
    case Errc::DimOverflow: return "DimOverflow";
    case Errc::WriteFailure: return "WriteFailure";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::NonMonotonicEpochs: return "NonMonotonicEpochs";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::InsufficientCount: return "InsufficientCount";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::ChannelTooSmall: return "ChannelTooSmall";
    case Errc::AllFramesDegenerate: return "AllFramesDegenerate";
    case Errc::EmptyAfterTokenization: return "EmptyAfterTokenization";
    case Errc::EmptyReferences: return "EmptyReferences";
    case Errc::CorpusTooSmall: return "CorpusTooSmall";
    case Errc::MissingSpice: return "MissingSpice";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ConstantSeries: return "ConstantSeries";
    case Errc::InsufficientOverlap: return "InsufficientOverlap";
    case Errc::EmptyCandidateList: return "EmptyCandidateList";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InfeasibleTargets: return "InfeasibleTargets";
    case Errc::SolverFailure: return "SolverFailure";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

Error Error::with_epoch(std::int64_t epoch) const {
  Error tagged(code_, "epoch " + std::to_string(epoch) + ": " + what());
  tagged.epoch_ = epoch;
  return tagged;
}

}  // namespace featstat
