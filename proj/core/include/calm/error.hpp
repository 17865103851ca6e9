#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace calm {

enum class Errc {
  ZeroVector,
  OutOfRange,
  DimensionMismatch,
  InvalidEmbedding,
  SingleClass,
  IndexOutOfRange,
  InsufficientPairs,
  DegenerateRange,
  GridMismatch,
  EmptyGroup,
  NoValidTriplets,
  ShapeMismatch,
  Degenerate,
  InvalidBounds,
  EmptyInput,
  InsufficientSamples,
  NonFiniteLoss,
  InvalidConfig,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidEmbedding: return "InvalidEmbedding";
    case Errc::SingleClass: return "SingleClass";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::InsufficientPairs: return "InsufficientPairs";
    case Errc::DegenerateRange: return "DegenerateRange";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::NoValidTriplets: return "NoValidTriplets";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::Degenerate: return "Degenerate";
    case Errc::InvalidBounds: return "InvalidBounds";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable error code. `what()` is
/// "<Code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace calm
