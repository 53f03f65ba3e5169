#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pmnn {

/// Base of every error thrown by the library. `code()` is a stable,
/// machine-readable identifier that the CLI echoes in its JSON error output.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension_mismatch", what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("invalid_argument", what) {}
};

/// The trial function was annihilated (or nearly so) by the operator or by
/// normalization, so no direction can be extracted from it.
class DegenerateError : public Error {
 public:
  DegenerateError(const std::string& what, long epoch = -1)
      : Error("degenerate_trial", what), epoch_(epoch) {}

  long epoch() const noexcept { return epoch_; }

 private:
  long epoch_;
};

class SingularMatrixError : public Error {
 public:
  explicit SingularMatrixError(const std::string& what) : Error("singular_matrix", what) {}
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long epoch)
      : Error("non_finite_loss", what), epoch_(epoch) {}

  long epoch() const noexcept { return epoch_; }

 private:
  long epoch_;
};

/// Carries every violation found while validating a configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error("invalid_config", join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid configuration:";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }

  std::vector<std::string> violations_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io_error", what) {}
};

}  // namespace pmnn
