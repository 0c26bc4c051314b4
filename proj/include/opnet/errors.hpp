#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace opnet {

enum class ErrorKind {
  InvalidData,
  InvalidShape,
  InvalidRank,
  InvalidBounds,
  NumericalFailure,
  DivergedAtEpoch,
  GridRequired,
  ParseError,
  MetaMissing,
  Usage,
};

std::string_view to_string(ErrorKind kind);

/// Base class for every error raised by the library. `kind()` lets callers
/// dispatch without a cascade of catch clauses.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, std::size_t iterations = 0)
      : Error(ErrorKind::NumericalFailure, what), iterations_(iterations) {}
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  std::size_t iterations_;
};

class DivergedAtEpoch : public Error {
 public:
  explicit DivergedAtEpoch(std::size_t epoch)
      : Error(ErrorKind::DivergedAtEpoch, "loss became non-finite at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidData: return "InvalidData";
    case ErrorKind::InvalidShape: return "InvalidShape";
    case ErrorKind::InvalidRank: return "InvalidRank";
    case ErrorKind::InvalidBounds: return "InvalidBounds";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::DivergedAtEpoch: return "DivergedAtEpoch";
    case ErrorKind::GridRequired: return "GridRequired";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MetaMissing: return "MetaMissing";
    case ErrorKind::Usage: return "Usage";
  }
  return "Unknown";
}

}  // namespace opnet
