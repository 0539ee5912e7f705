#pragma once

#include <stdexcept>
#include <string>

namespace rearrange {

// Every error raised by the library derives from Error so callers can catch
// the whole family; the CLI maps the concrete types onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
  using Error::Error;
};
class ContractViolation : public Error {
  using Error::Error;
};
class NonFiniteError : public Error {
  using Error::Error;
};
class ParseError : public Error {
  using Error::Error;
};
class ValidationError : public Error {
  using Error::Error;
};
class ConfigError : public Error {
  using Error::Error;
};
class ArityError : public Error {
  using Error::Error;
};
class GenerationError : public Error {
  using Error::Error;
};
class GroundingError : public Error {
  using Error::Error;
};
// A "one" phrase matched several entities.
class AmbiguityError : public GroundingError {
  using GroundingError::GroundingError;
};
class CompileError : public Error {
  using Error::Error;
};
class PlanningError : public Error {
  using Error::Error;
};
class ExecutionError : public Error {
  using Error::Error;
};
class MissingAssetError : public Error {
  using Error::Error;
};
class CheckpointError : public Error {
  using Error::Error;
};
class TrainingAbort : public Error {
  using Error::Error;
};

}  // namespace rearrange
