#pragma once

#include <stdexcept>
#include <string>

namespace mwell {

/// Violated precondition on an argument (bad position, negative time, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure detected that its result cannot be trusted.
/// `kind()` is a stable machine-readable tag used by the CLI error JSON.
class NumericalAlarm : public std::runtime_error {
 public:
  NumericalAlarm(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Evaluation at (or too close to) a zero of the wavefunction.
class NodeGuardError : public NumericalAlarm {
 public:
  explicit NodeGuardError(const std::string& what)
      : NumericalAlarm("node_guard", what) {}
};

}  // namespace mwell
