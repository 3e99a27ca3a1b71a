#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace densecorr {

enum class Errc {
  ParseError,
  LabelMismatch,
  DisconnectedPart,
  IndexOutOfRange,
  NumericalFailure,
  DegenerateInput,
  ChartConflict,
  EmptyChart,
  KTooLarge,
  EmptyPart,
  NoSurface,
  EmptyInput,
  EmptyInstance,
  EmptySample,
  ShapeMismatch,
  DimensionMismatch,
  MissingTile,
  NoMasks,
  StaleSession,
  NothingToExport,
  SchemaError,
  BadMagic,
  NotFound,
  InvalidArgument,
  IoError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::ParseError: return "ParseError";
    case Errc::LabelMismatch: return "LabelMismatch";
    case Errc::DisconnectedPart: return "DisconnectedPart";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::NumericalFailure: return "NumericalFailure";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::ChartConflict: return "ChartConflict";
    case Errc::EmptyChart: return "EmptyChart";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::EmptyPart: return "EmptyPart";
    case Errc::NoSurface: return "NoSurface";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyInstance: return "EmptyInstance";
    case Errc::EmptySample: return "EmptySample";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::MissingTile: return "MissingTile";
    case Errc::NoMasks: return "NoMasks";
    case Errc::StaleSession: return "StaleSession";
    case Errc::NothingToExport: return "NothingToExport";
    case Errc::SchemaError: return "SchemaError";
    case Errc::BadMagic: return "BadMagic";
    case Errc::NotFound: return "NotFound";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure the toolkit reports on bad input carries one of the codes
/// above; anything else escaping the library is an internal error.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace densecorr
