#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tweezer {

// Error kinds raised across the library. Every throwing operation reports one
// of these through tweezer::Error so callers can branch on the kind.
enum class Errc {
    ZeroDimension,
    NonPositivePitch,
    InvalidProbability,
    NegativeMean,
    SizeMismatch,
    InvalidRegister,
    ParseError,
    EmptyTargets,
    GridTooSmall,
    InvalidMask,
    InsufficientAtoms,
    PlanningFailed,
    ZeroLengthMove,
    InvalidArgument,
    NegativeDuration,
    ConstraintViolation,
    UnimodalHistogram,
    NoReferenceAtoms,
    DegenerateConfusion,
    EmptySample,
    Underdetermined,
    NoConvergence,
    NonPositiveTime,
    ConfigError,
    IoError,
};

inline std::string_view errc_name(Errc code) {
    switch (code) {
    case Errc::ZeroDimension: return "ZeroDimension";
    case Errc::NonPositivePitch: return "NonPositivePitch";
    case Errc::InvalidProbability: return "InvalidProbability";
    case Errc::NegativeMean: return "NegativeMean";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::InvalidRegister: return "InvalidRegister";
    case Errc::ParseError: return "ParseError";
    case Errc::EmptyTargets: return "EmptyTargets";
    case Errc::GridTooSmall: return "GridTooSmall";
    case Errc::InvalidMask: return "InvalidMask";
    case Errc::InsufficientAtoms: return "InsufficientAtoms";
    case Errc::PlanningFailed: return "PlanningFailed";
    case Errc::ZeroLengthMove: return "ZeroLengthMove";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NegativeDuration: return "NegativeDuration";
    case Errc::ConstraintViolation: return "ConstraintViolation";
    case Errc::UnimodalHistogram: return "UnimodalHistogram";
    case Errc::NoReferenceAtoms: return "NoReferenceAtoms";
    case Errc::DegenerateConfusion: return "DegenerateConfusion";
    case Errc::EmptySample: return "EmptySample";
    case Errc::Underdetermined: return "Underdetermined";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::NonPositiveTime: return "NonPositiveTime";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace tweezer
