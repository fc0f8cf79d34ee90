#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hawkesmix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of an operation (negative time,
/// interval outside the observation window, malformed parameters).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed: non-convergence, overflow, singular solve.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A modelling hypothesis does not hold (subcritical reproduction matrix,
/// finite kernel moments, mixing-rate conditions). The CLI maps this to a
/// refusal rather than a failure.
class HypothesisError : public Error {
 public:
  HypothesisError(std::string hypothesis, const std::string& detail)
      : Error(hypothesis + ": " + detail), hypothesis_(std::move(hypothesis)) {}

  [[nodiscard]] const std::string& hypothesis() const noexcept {
    return hypothesis_;
  }

 private:
  std::string hypothesis_;
};

}  // namespace hawkesmix
