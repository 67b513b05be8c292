#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "simgap/systems.hpp"

namespace simgap {

struct ExternalOptions {
  /// argv of the child process; command[0] is looked up on PATH.
  std::vector<std::string> command;
  std::chrono::milliseconds timeout{5000};
};

/// Adapter for a simulator living in a child process that speaks
/// newline-delimited JSON over stdin/stdout:
///
///   {"cmd":"info"}                                  -> {"n":3,"m":2}
///   {"cmd":"step","x":[..],"u":[..],"tau":t,"seed":s} -> {"x_next":[..]}
///
/// A reply carrying {"error": "..."} aborts the current batch with a
/// SimulatorIoError. The info reply may set "common_random_numbers": true
/// when the child guarantees seed-indexed noise independent of the state.
class ExternalSimulator final : public Simulator {
 public:
  ExternalSimulator(SystemSpec spec, ExternalOptions options);
  ~ExternalSimulator() override;

  ExternalSimulator(const ExternalSimulator&) = delete;
  ExternalSimulator& operator=(const ExternalSimulator&) = delete;

  const SystemSpec& spec() const override { return spec_; }
  Vec step(std::span<const double> x, std::span<const double> u,
           std::uint64_t seed) override;
  bool supports_common_random_numbers() const override { return crn_; }
  std::unique_ptr<Simulator> clone() const override;
  std::string describe() const override;

 private:
  class Process;

  std::string request(const std::string& line);

  SystemSpec spec_;
  ExternalOptions options_;
  std::unique_ptr<Process> proc_;
  bool crn_ = false;
};

}  // namespace simgap
