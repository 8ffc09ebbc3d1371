#pragma once

#include <stdexcept>
#include <string>

namespace pdt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PDT_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

PDT_DEFINE_ERROR(InvalidArgument);
PDT_DEFINE_ERROR(AllZeroLikelihood);
PDT_DEFINE_ERROR(PolicyReturnedMaskedAction);
PDT_DEFINE_ERROR(StepAfterDone);
PDT_DEFINE_ERROR(DimensionMismatch);
PDT_DEFINE_ERROR(NoLegalAction);
PDT_DEFINE_ERROR(DivergenceDetected);
PDT_DEFINE_ERROR(PolicyUndefinedAtState);
PDT_DEFINE_ERROR(MissingCheckpoint);
PDT_DEFINE_ERROR(ConfigError);

#undef PDT_DEFINE_ERROR

}  // namespace pdt
