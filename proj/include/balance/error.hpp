#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace balance {

/// Bad shapes, out-of-range parameters, malformed inputs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A sampler was asked for more than the pool can give (or the pool is empty).
class InsufficientCandidates : public std::runtime_error {
 public:
  InsufficientCandidates(std::size_t requested, std::size_t available)
      : std::runtime_error("insufficient candidates: requested " + std::to_string(requested) +
                           ", available " + std::to_string(available)),
        requested_(requested),
        available_(available) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t available() const noexcept { return available_; }

 private:
  std::size_t requested_;
  std::size_t available_;
};

/// A training run blew up.
class Diverged : public std::runtime_error {
 public:
  explicit Diverged(std::size_t step)
      : std::runtime_error("training diverged at step " + std::to_string(step)), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace balance
