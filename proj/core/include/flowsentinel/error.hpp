#pragma once

#include <stdexcept>
#include <string>

namespace flowsentinel {

// Every failure raised by the library derives from Error. The concrete type
// tells callers (the CLI in particular) which exit code family it belongs to.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor / layer shape disagreement.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Bad argument values: out-of-range indices, empty inputs, malformed targets.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// CSV header does not have the expected shape (e.g. missing label column).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A CSV cell could not be parsed or is not finite.
class DataError : public Error {
 public:
  using Error::Error;
};

// A raw label is not covered by any taxonomy rule, or a rule file is malformed.
class TaxonomyError : public Error {
 public:
  using Error::Error;
};

// Inconsistent model/task configuration (feature count too small, class
// count mismatch between a model and the task it is evaluated on).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Model container is corrupt, truncated or of an unknown version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Broken internal invariant. Seeing one of these is a bug.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace flowsentinel
