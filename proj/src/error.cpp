#include "gist/error.hpp"

namespace gist {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::NotPowerOfTwo: return "NotPowerOfTwo";
    case Errc::NotSquare: return "NotSquare";
    case Errc::MixedResolution: return "MixedResolution";
    case Errc::PartialLabels: return "PartialLabels";
    case Errc::TooFewRecords: return "TooFewRecords";
    case Errc::CorruptArchive: return "CorruptArchive";
    case Errc::UnsupportedImage: return "UnsupportedImage";
    case Errc::UnsupportedResolution: return "UnsupportedResolution";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ResolutionMismatch: return "ResolutionMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
    case Errc::ClassOutOfRange: return "ClassOutOfRange";
    case Errc::MissingClass: return "MissingClass";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::EmptyConfusion: return "EmptyConfusion";
    case Errc::LabelVocabularyMismatch: return "LabelVocabularyMismatch";
    case Errc::MissingSyntheticSet: return "MissingSyntheticSet";
    case Errc::SizeExceedsDataset: return "SizeExceedsDataset";
    case Errc::UnknownHyperparameter: return "UnknownHyperparameter";
    case Errc::EmptyTable: return "EmptyTable";
    case Errc::NotPerfectSquare: return "NotPerfectSquare";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::InvalidStageSet: return "InvalidStageSet";
    case Errc::StageFailed: return "StageFailed";
    case Errc::PoolTooSmall: return "PoolTooSmall";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::UnknownItem: return "UnknownItem";
    case Errc::DuplicateResponse: return "DuplicateResponse";
    case Errc::SessionComplete: return "SessionComplete";
    case Errc::SessionIncomplete: return "SessionIncomplete";
  }
  return "Unknown";
}

}  // namespace gist
