#pragma once

#include <stdexcept>
#include <string>

namespace dart {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DART_DEFINE_ERROR(Name)            \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

DART_DEFINE_ERROR(InvalidSpec);
DART_DEFINE_ERROR(EmptySupport);
DART_DEFINE_ERROR(InsufficientHistory);
DART_DEFINE_ERROR(MissingComponent);
DART_DEFINE_ERROR(WindowTooShort);
DART_DEFINE_ERROR(NonpositiveVariance);
DART_DEFINE_ERROR(InsufficientData);
DART_DEFINE_ERROR(LengthMismatch);
DART_DEFINE_ERROR(ParseError);
DART_DEFINE_ERROR(NonMonotonicDates);
DART_DEFINE_ERROR(NegativeCount);
DART_DEFINE_ERROR(ConfigError);

#undef DART_DEFINE_ERROR

}  // namespace dart
