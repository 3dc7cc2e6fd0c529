#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pmnn {

/// Thrown when an iterative procedure exhausts its budget.
/// Carries the best estimate reached so callers can still inspect it.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best_estimate)
      : std::runtime_error(what), best_(best_estimate) {}

  double best_estimate() const noexcept { return best_; }

 private:
  double best_;
};

/// Thrown when a non-finite value appears mid-computation.
/// The tag names the term that produced it.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::string term_tag)
      : std::runtime_error(what + " [" + term_tag + "]"), tag_(std::move(term_tag)) {}

  const std::string& term_tag() const noexcept { return tag_; }

 private:
  std::string tag_;
};

}  // namespace pmnn
