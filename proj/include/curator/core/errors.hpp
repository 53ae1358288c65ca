#pragma once

#include <stdexcept>
#include <string>

namespace curator {

// Base of every error the library throws. Catch this at process boundaries.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CURATOR_DEFINE_ERROR(Name) \
  class Name : public Error {      \
   public:                         \
    using Error::Error;            \
  }

CURATOR_DEFINE_ERROR(DimensionError);
CURATOR_DEFINE_ERROR(NormalizationError);
CURATOR_DEFINE_ERROR(IoError);
CURATOR_DEFINE_ERROR(ParseError);
CURATOR_DEFINE_ERROR(EmptyManifestError);
CURATOR_DEFINE_ERROR(DecodeError);
CURATOR_DEFINE_ERROR(EmptyReferenceError);
CURATOR_DEFINE_ERROR(ArithmeticError);
CURATOR_DEFINE_ERROR(MissingFeatureError);
CURATOR_DEFINE_ERROR(EmptyInputError);
CURATOR_DEFINE_ERROR(NoDataError);
CURATOR_DEFINE_ERROR(NoVotesError);
CURATOR_DEFINE_ERROR(PreconditionError);
CURATOR_DEFINE_ERROR(UnknownCountryError);
CURATOR_DEFINE_ERROR(DuplicateRatingError);
CURATOR_DEFINE_ERROR(ConfigError);
CURATOR_DEFINE_ERROR(StageError);

#undef CURATOR_DEFINE_ERROR

// Retryable: the remote inference service could not be reached or answered
// with a transport-level failure.
class ProviderUnavailable : public Error {
 public:
  using Error::Error;
};

}  // namespace curator
