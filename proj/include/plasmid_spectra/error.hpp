#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace plasmid {

enum class ErrorKind {
    NonFiniteEvaluation,
    DomainError,
    IntegratorFailure,
    SingularEndpoint,
    StabilityError,
    GridMismatch,
    CflViolation,
    NotConverged,
    StepUnderflow,
    NoContraction,
    RegimeError,
    QuadratureFailure,
    SlowConvergence,
    BracketFailure,
    NonCauchy,
    DegenerateDominance,
    ConfigError,
};

constexpr std::string_view to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::IntegratorFailure: return "IntegratorFailure";
    case ErrorKind::SingularEndpoint: return "SingularEndpoint";
    case ErrorKind::StabilityError: return "StabilityError";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::CflViolation: return "CflViolation";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::StepUnderflow: return "StepUnderflow";
    case ErrorKind::NoContraction: return "NoContraction";
    case ErrorKind::RegimeError: return "RegimeError";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::SlowConvergence: return "SlowConvergence";
    case ErrorKind::BracketFailure: return "BracketFailure";
    case ErrorKind::NonCauchy: return "NonCauchy";
    case ErrorKind::DegenerateDominance: return "DegenerateDominance";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace plasmid
