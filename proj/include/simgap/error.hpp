#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace simgap {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

/// Raised when a requested discretization would exceed a configured cap.
class ResourceLimit : public Error {
 public:
  ResourceLimit(const std::string& what, std::size_t required, std::size_t cap)
      : Error(what + ": requires " + std::to_string(required) +
              " elements, cap is " + std::to_string(cap)),
        required_(required),
        cap_(cap) {}
  std::size_t required() const { return required_; }
  std::size_t cap() const { return cap_; }

 private:
  std::size_t required_;
  std::size_t cap_;
};

/// Failure talking to a simulator backend. Carries the raw payload that
/// triggered it (empty on timeouts) and, when known, the campaign location.
class SimulatorIoError : public Error {
 public:
  SimulatorIoError(const std::string& what, std::string payload = {})
      : Error(what + (payload.empty() ? "" : " (payload: " + payload + ")")),
        message_(what),
        payload_(std::move(payload)) {}
  const std::string& payload() const { return payload_; }

  /// Same error with a location prefix such as "(r=1, j=0, k=3)".
  SimulatorIoError at(const std::string& location) const {
    return SimulatorIoError("at " + location + ": " + message_, payload_);
  }

 private:
  std::string message_;
  std::string payload_;
};

class CorruptDataset : public Error {
 public:
  using Error::Error;
};

class MissingArtifact : public Error {
 public:
  using Error::Error;
};

/// All schema problems found in a configuration, not only the first one.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "invalid configuration:";
    for (const auto& s : issues) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> issues_;
};

}  // namespace simgap
