#pragma once

#include <stdexcept>
#include <string>

namespace rsc {

// Root of every error raised by the library. Callers that only care about
// "something went wrong" catch this; tests match the concrete subclasses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RSC_DECLARE_ERROR(Name)                   \
  class Name : public Error {                     \
   public:                                        \
    explicit Name(const std::string& what)        \
        : Error(std::string(#Name ": ") + what) {} \
  }

// numerics
RSC_DECLARE_ERROR(ShapeMismatch);
RSC_DECLARE_ERROR(NonFiniteResult);
RSC_DECLARE_ERROR(NonScalarLoss);
RSC_DECLARE_ERROR(InvalidRange);
// sources
RSC_DECLARE_ERROR(BadMagic);
RSC_DECLARE_ERROR(TruncatedFile);
RSC_DECLARE_ERROR(CountMismatch);
RSC_DECLARE_ERROR(NonPsdCovariance);
RSC_DECLARE_ERROR(EmptyDataset);
// ratecontrol / channel / models
RSC_DECLARE_ERROR(RateOutOfRange);
RSC_DECLARE_ERROR(ZeroNoise);
RSC_DECLARE_ERROR(DomainError);
// persistence / pipeline
RSC_DECLARE_ERROR(DoomedCheckpoint);
RSC_DECLARE_ERROR(UnsupportedVersion);
RSC_DECLARE_ERROR(MissingCheckpoint);
RSC_DECLARE_ERROR(ConfigError);
RSC_DECLARE_ERROR(IoError);

#undef RSC_DECLARE_ERROR

}  // namespace rsc
