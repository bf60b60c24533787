#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace strokegan {

enum class ErrorKind {
  MissingFile,
  MalformedRecord,
  StrokeIdOutOfRange,
  DuplicateCodepoint,
  UnknownCharacter,
  InvalidEncoding,
  UnrenderableFont,
  EmptyGlyphSet,
  TooFewCharacters,
  StructuralSetUnavailable,
  PercentOutOfRange,
  EmptyDataset,
  ShapeMismatch,
  DomainError,
  NonFiniteLoss,
  CorruptCheckpoint,
  ImageTooSmall,
  DegenerateCovariance,
  NoPairedTestData,
  InvalidConfig,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::StrokeIdOutOfRange: return "StrokeIdOutOfRange";
    case ErrorKind::DuplicateCodepoint: return "DuplicateCodepoint";
    case ErrorKind::UnknownCharacter: return "UnknownCharacter";
    case ErrorKind::InvalidEncoding: return "InvalidEncoding";
    case ErrorKind::UnrenderableFont: return "UnrenderableFont";
    case ErrorKind::EmptyGlyphSet: return "EmptyGlyphSet";
    case ErrorKind::TooFewCharacters: return "TooFewCharacters";
    case ErrorKind::StructuralSetUnavailable: return "StructuralSetUnavailable";
    case ErrorKind::PercentOutOfRange: return "PercentOutOfRange";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::ImageTooSmall: return "ImageTooSmall";
    case ErrorKind::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorKind::NoPairedTestData: return "NoPairedTestData";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind; the
/// message is prefixed with the kind name so CLI diagnostics are greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Error tied to a 1-based line of an input file.
class LineError : public Error {
 public:
  LineError(ErrorKind kind, std::size_t line_no, const std::string& detail)
      : Error(kind, "line " + std::to_string(line_no) + ": " + detail), line_no_(line_no) {}

  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

}  // namespace strokegan
