#pragma once

#include <stdexcept>
#include <string>

namespace rsctmdp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters, malformed documents, mismatched inputs.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A model document that does not follow the schema. Messages carry the
/// offending location, e.g. `rates[3].value`.
class ParseError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A certificate was required but does not pass the conditions it is used for.
class CertificateError : public Error {
public:
    using Error::Error;
};

/// Overflow, non-finite values, or a tripped explosion guard.
class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace rsctmdp
