#pragma once

#include <stdexcept>
#include <string>

namespace dbarrier {

enum class ErrorCode {
  invalid_parameter,
  invalid_schedule,
  numerical_failure,
  inconsistent_moments,
  config_error,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_parameter: return "invalid_parameter";
    case ErrorCode::invalid_schedule: return "invalid_schedule";
    case ErrorCode::numerical_failure: return "numerical_failure";
    case ErrorCode::inconsistent_moments: return "inconsistent_moments";
    case ErrorCode::config_error: return "config_error";
  }
  return "unknown";
}

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidParameter : public Error {
 public:
  explicit InvalidParameter(const std::string& what)
      : Error(ErrorCode::invalid_parameter, what) {}
};

class InvalidSchedule : public Error {
 public:
  explicit InvalidSchedule(const std::string& what)
      : Error(ErrorCode::invalid_schedule, what) {}
};

class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& what)
      : Error(ErrorCode::numerical_failure, what) {}
};

class InconsistentMoments : public Error {
 public:
  explicit InconsistentMoments(const std::string& what)
      : Error(ErrorCode::inconsistent_moments, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::config_error, what) {}
};

}  // namespace dbarrier
