#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace voxtok {

enum class Errc {
  MissingFile,
  MalformedHeader,
  PayloadSizeMismatch,
  IoFailure,
  InvalidSpec,
  OddSpatialDim,
  ParityMismatch,
  ShapeMismatch,
  ChannelMismatch,
  CodeOutOfRange,
  InvalidLength,
  DataShapeMismatch,
  NonFiniteLoss,
  MixedBitWidth,
  MalformedTokenFile,
  MalformedCheckpoint,
  ConfigError,
};

constexpr std::string_view to_string(Errc e) noexcept {
  switch (e) {
    case Errc::MissingFile: return "MissingFile";
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::PayloadSizeMismatch: return "PayloadSizeMismatch";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::OddSpatialDim: return "OddSpatialDim";
    case Errc::ParityMismatch: return "ParityMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ChannelMismatch: return "ChannelMismatch";
    case Errc::CodeOutOfRange: return "CodeOutOfRange";
    case Errc::InvalidLength: return "InvalidLength";
    case Errc::DataShapeMismatch: return "DataShapeMismatch";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::MixedBitWidth: return "MixedBitWidth";
    case Errc::MalformedTokenFile: return "MalformedTokenFile";
    case Errc::MalformedCheckpoint: return "MalformedCheckpoint";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace voxtok
