#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eflow {

enum class Errc {
  NotHermitian,
  NotPSD,
  DimensionMismatch,
  InvalidProblem,
  InvalidConfig,
  StepSizeUnderflow,
  ToleranceUnreachable,
  OutOfRange,
  ShiftNotInvertible,
  NotCommutingInitialData,
  GammaInSpectrum,
  NotConverged,
  InsufficientSamples,
  NonDecaying,
  DegenerateDenominator,
  TooManyModes,
  NotAntisymmetric,
  InconsistentRegime,
  ParseError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::NotHermitian: return "NotHermitian";
    case Errc::NotPSD: return "NotPSD";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidProblem: return "InvalidProblem";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::StepSizeUnderflow: return "StepSizeUnderflow";
    case Errc::ToleranceUnreachable: return "ToleranceUnreachable";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::ShiftNotInvertible: return "ShiftNotInvertible";
    case Errc::NotCommutingInitialData: return "NotCommutingInitialData";
    case Errc::GammaInSpectrum: return "GammaInSpectrum";
    case Errc::NotConverged: return "NotConverged";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::NonDecaying: return "NonDecaying";
    case Errc::DegenerateDenominator: return "DegenerateDenominator";
    case Errc::TooManyModes: return "TooManyModes";
    case Errc::NotAntisymmetric: return "NotAntisymmetric";
    case Errc::InconsistentRegime: return "InconsistentRegime";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable error code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace eflow
