#pragma once

#include <stdexcept>
#include <string>

namespace nhi {

enum class ErrorKind {
    InvalidParameter,
    InvalidInput,
    NumericalFailure,
    IllConditioned,
    OnSpectrum,
    DegenerateReference,
    InvalidReference,
    Pole,
    BranchAmbiguity,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::NumericalFailure: return "numerical-failure";
    case ErrorKind::IllConditioned: return "ill-conditioned";
    case ErrorKind::OnSpectrum: return "on-spectrum";
    case ErrorKind::DegenerateReference: return "degenerate-reference";
    case ErrorKind::InvalidReference: return "invalid-reference";
    case ErrorKind::Pole: return "pole";
    case ErrorKind::BranchAmbiguity: return "branch-ambiguity";
    }
    return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
/// `value` holds a diagnostic number when one exists (condition estimate,
/// offending V0, distance to spectrum).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, double value = 0.0)
        : std::runtime_error(message), kind_(kind), value_(value) {}

    ErrorKind kind() const noexcept { return kind_; }
    double value() const noexcept { return value_; }

private:
    ErrorKind kind_;
    double value_;
};

} // namespace nhi
