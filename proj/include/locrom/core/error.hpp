#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace locrom {

/// Failure categories shared by every module. The CLI maps them to messages
/// and a nonzero exit code; tests match on them.
enum class ErrorKind {
  invalid_input,
  numerical_failure,
  singular_matrix,
  singular_jacobian,
  invalid_schedule,
  out_of_domain,
  duplicate_point,
  snapshot_generation,
  corrupt_store,
  invalid_k,
  elbow_undefined,
  degenerate_cluster,
  invalid_assignment,
  inconsistent_decomposition,
  empty_report,
  config,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::numerical_failure: return "numerical-failure";
    case ErrorKind::singular_matrix: return "singular-matrix";
    case ErrorKind::singular_jacobian: return "singular-jacobian";
    case ErrorKind::invalid_schedule: return "invalid-schedule";
    case ErrorKind::out_of_domain: return "out-of-domain";
    case ErrorKind::duplicate_point: return "duplicate";
    case ErrorKind::snapshot_generation: return "snapshot-generation";
    case ErrorKind::corrupt_store: return "corrupt-store";
    case ErrorKind::invalid_k: return "invalid-k";
    case ErrorKind::elbow_undefined: return "elbow-undefined";
    case ErrorKind::degenerate_cluster: return "degenerate-cluster";
    case ErrorKind::invalid_assignment: return "invalid-assignment";
    case ErrorKind::inconsistent_decomposition: return "inconsistent-decomposition";
    case ErrorKind::empty_report: return "empty-report";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 protected:
  struct Verbatim {};
  Error(ErrorKind kind, const std::string& full_message, Verbatim)
      : std::runtime_error(full_message), kind_(kind) {}

 private:
  ErrorKind kind_;
};

/// Raised by the Newton solver; carries the iterate at which the Jacobian
/// could not be factored.
class SingularJacobianError : public Error {
 public:
  SingularJacobianError(const std::string& message, std::vector<double> iterate)
      : Error(ErrorKind::singular_jacobian, message), iterate_(std::move(iterate)) {}

  const std::vector<double>& iterate() const noexcept { return iterate_; }

 private:
  std::vector<double> iterate_;
};

/// Wraps an error raised inside a pipeline stage so the stage name reaches
/// the user.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "[" + stage + "] " + cause.what(), Verbatim{}), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace locrom
