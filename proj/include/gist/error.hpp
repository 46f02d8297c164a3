#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gist {

enum class Errc {
  InvalidArgument,
  Io,
  NotPowerOfTwo,
  NotSquare,
  MixedResolution,
  PartialLabels,
  TooFewRecords,
  CorruptArchive,
  UnsupportedImage,
  UnsupportedResolution,
  ShapeMismatch,
  ResolutionMismatch,
  EmptyDataset,
  CorruptCheckpoint,
  ClassOutOfRange,
  MissingClass,
  TooFewSamples,
  NotSymmetric,
  DimMismatch,
  EmptyConfusion,
  LabelVocabularyMismatch,
  MissingSyntheticSet,
  SizeExceedsDataset,
  UnknownHyperparameter,
  EmptyTable,
  NotPerfectSquare,
  ParseError,
  UnknownKey,
  InvalidStageSet,
  StageFailed,
  PoolTooSmall,
  UnknownSession,
  UnknownItem,
  DuplicateResponse,
  SessionComplete,
  SessionIncomplete,
};

std::string_view to_string(Errc code);

// Every failure raised by the library carries one of the codes above so
// callers (and the HTTP layer) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace gist
