#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace shs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "dimension_mismatch"; }
};

class NonFiniteState : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "non_finite_state"; }
};

/// A catalog function violated its declared contract (e.g. rate above its bound).
class SpecViolation : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "spec_violation"; }
};

/// Jump count exceeded the configured budget before the horizon.
class ZenoSuspected : public Error {
 public:
  ZenoSuspected(const std::string& what, double time, long jumps)
      : Error(what), time_(time), jumps_(jumps) {}
  const char* kind() const noexcept override { return "zeno_suspected"; }
  double time() const noexcept { return time_; }
  long jumps() const noexcept { return jumps_; }

 private:
  double time_;
  long jumps_;
};

class SamplingFailure : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "sampling_failure"; }
};

class SurvivalTooSmall : public Error {
 public:
  SurvivalTooSmall(const std::string& what, double survival)
      : Error(what), survival_(survival) {}
  const char* kind() const noexcept override { return "survival_too_small"; }
  double survival() const noexcept { return survival_; }

 private:
  double survival_;
};

/// Query outside the region where a rate estimate is trusted.
class OutsideValidity : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "outside_validity"; }
};

class UnknownAgent : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "unknown_agent"; }
};

class CorruptInput : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "corrupt_input"; }
};

class ParseError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "parse_error"; }
};

/// Carries every violated invariant found while validating a configuration.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const char* kind() const noexcept override { return "validation_error"; }
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out = "invalid configuration";
    for (const auto& s : p) out += "; " + s;
    return out;
  }
  std::vector<std::string> problems_;
};

}  // namespace shs
