#pragma once

#include <stdexcept>
#include <string>

namespace mcdseg {

// Every error raised by the library carries one of these codes. The CLI maps
// them onto process exit codes, so the numeric values are part of the
// external interface.
enum class ErrorCode : int {
  kDimension = 10,
  kParameter = 11,
  kUsage = 12,
  kInput = 13,
  kDegenerate = 14,
  kConfig = 15,
  kEmptyPrediction = 16,
  kEmptyMask = 17,
  kInsufficientTrials = 18,
  kIo = 20,
  kMagicMismatch = 21,
  kTruncated = 22,
  kBadHeader = 23,
  kConfigMismatch = 24,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define MCDSEG_DEFINE_ERROR(Name, Code)                                   \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(ErrorCode::Code, what) {} \
  }

MCDSEG_DEFINE_ERROR(DimensionError, kDimension);
MCDSEG_DEFINE_ERROR(ParameterError, kParameter);
MCDSEG_DEFINE_ERROR(UsageError, kUsage);
MCDSEG_DEFINE_ERROR(InputError, kInput);
MCDSEG_DEFINE_ERROR(DegenerateError, kDegenerate);
MCDSEG_DEFINE_ERROR(ConfigError, kConfig);
MCDSEG_DEFINE_ERROR(EmptyPrediction, kEmptyPrediction);
MCDSEG_DEFINE_ERROR(EmptyMask, kEmptyMask);
MCDSEG_DEFINE_ERROR(InsufficientTrials, kInsufficientTrials);
MCDSEG_DEFINE_ERROR(IoError, kIo);
MCDSEG_DEFINE_ERROR(MagicMismatch, kMagicMismatch);
MCDSEG_DEFINE_ERROR(TruncatedFile, kTruncated);
MCDSEG_DEFINE_ERROR(BadHeader, kBadHeader);
MCDSEG_DEFINE_ERROR(ConfigMismatch, kConfigMismatch);

#undef MCDSEG_DEFINE_ERROR

}  // namespace mcdseg
