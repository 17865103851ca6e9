#pragma once

#include <stdexcept>
#include <string>

#include "calm/error.hpp"

namespace calm::cli {

enum class ExitCode : int {
  Ok = 0,
  Failure = 1,
  ConfigParse = 2,
  Io = 3,
  Data = 4,  // InsufficientPairs, DegenerateRange, SingleClass
  NonFinite = 5,
};

/// Failure reported by a command; `kind` becomes the "error" field of the
/// JSON line written to stderr.
class CliError : public std::runtime_error {
 public:
  CliError(ExitCode code, std::string kind, const std::string& detail)
      : std::runtime_error(detail), code_(code), kind_(std::move(kind)) {}

  ExitCode code() const noexcept { return code_; }
  const std::string& kind() const noexcept { return kind_; }
  /// Path of a diagnostic file written before failing, if any.
  const std::string& dump_path() const noexcept { return dump_path_; }
  void set_dump_path(std::string path) { dump_path_ = std::move(path); }

 private:
  ExitCode code_;
  std::string kind_;
  std::string dump_path_;
};

class IoError : public CliError {
 public:
  explicit IoError(const std::string& detail) : CliError(ExitCode::Io, "IoError", detail) {}
};

class ConfigError : public CliError {
 public:
  explicit ConfigError(const std::string& detail) : CliError(ExitCode::ConfigParse, "ConfigError", detail) {}
};

ExitCode exit_code_for(Errc code) noexcept;

}  // namespace calm::cli
