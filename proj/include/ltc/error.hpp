#pragma once

#include <stdexcept>
#include <string>

namespace ltc {

/// Input violates an operation's shape or range precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation called in the wrong state (e.g. backward without a forward cache).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Training cannot proceed: non-finite gradients or a single-class data set.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed binary payload: bad magic, unknown version, truncation, checksum.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Server and source disagree on the student version.
class ResyncError : public std::runtime_error {
 public:
  ResyncError(const std::string& what, unsigned expected, unsigned received)
      : std::runtime_error(what), expected_version(expected), received_version(received) {}
  unsigned expected_version;
  unsigned received_version;
};

/// Scenario file problem; carries the 1-based line number when known (0 otherwise).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0, const std::string& origin = "")
      : std::runtime_error((origin.empty() ? "" : origin + (line > 0 ? " " : ": ")) +
                           (line > 0 ? "line " + std::to_string(line) + ": " : "") + what),
        line_number(line) {}
  int line_number;
};

}  // namespace ltc
