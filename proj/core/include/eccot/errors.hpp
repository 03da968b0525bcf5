#pragma once

#include <stdexcept>
#include <string>

namespace eccot {

/// Process exit codes shared by every `eccot` subcommand.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kNumeric = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual ExitCode exit_code() const noexcept = 0;
};

/// Invalid configuration, bad flag values, unreadable paths.
class ConfigError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

/// NaN/Inf or divergence during a numeric routine.
class NumericError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::kNumeric; }
};

/// Caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

[[noreturn]] void throw_contract(const std::string& what);

inline void require(bool condition, const char* what) {
  if (!condition) throw_contract(what);
}

}  // namespace eccot
