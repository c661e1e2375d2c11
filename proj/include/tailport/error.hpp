#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tailport {

enum class ErrorKind {
  invalid_bandwidth,
  invalid_lag,
  domain,
  data,
  degenerate_data,
  parse,
  capacity,
  fit_failed,
  internal,
};

/// Base class for every error raised by the library. The kind drives the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidBandwidth : public Error {
 public:
  explicit InvalidBandwidth(const std::string& what) : Error(ErrorKind::invalid_bandwidth, what) {}
};

class InvalidLag : public Error {
 public:
  explicit InvalidLag(const std::string& what) : Error(ErrorKind::invalid_lag, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class DegenerateData : public Error {
 public:
  explicit DegenerateData(const std::string& what) : Error(ErrorKind::degenerate_data, what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error(ErrorKind::capacity, what) {}
};

/// Thrown by the QML fitter when no restart converged; carries the best iterate seen.
class FitFailed : public Error {
 public:
  FitFailed(const std::string& what, std::vector<double> best_params, double best_objective)
      : Error(ErrorKind::fit_failed, what),
        best_params_(std::move(best_params)),
        best_objective_(best_objective) {}
  const std::vector<double>& best_params() const noexcept { return best_params_; }
  double best_objective() const noexcept { return best_objective_; }

 private:
  std::vector<double> best_params_;
  double best_objective_;
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what) : Error(ErrorKind::internal, what) {}
};

}  // namespace tailport
