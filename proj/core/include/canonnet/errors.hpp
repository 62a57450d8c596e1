#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace canonnet {

enum class ErrorKind {
  DegenerateInput,
  DegenerateSpectrum,
  SignAmbiguous,
  TiedEmbedding,
  DegenerateCentroid,
  DegenerateLandmark,
  NoConvergence,
  RejectionLimit,
  FormatVersionMismatch,
  CorruptRecord,
  ShapeMismatch,
  Diverged,
  NoCorrespondences,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every library failure is reported through this type; `kind()` tells the
/// failure modes apart without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorKind::SignAmbiguous: return "SignAmbiguous";
    case ErrorKind::TiedEmbedding: return "TiedEmbedding";
    case ErrorKind::DegenerateCentroid: return "DegenerateCentroid";
    case ErrorKind::DegenerateLandmark: return "DegenerateLandmark";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::RejectionLimit: return "RejectionLimit";
    case ErrorKind::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorKind::CorruptRecord: return "CorruptRecord";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::NoCorrespondences: return "NoCorrespondences";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace canonnet
