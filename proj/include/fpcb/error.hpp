#pragma once

#include <stdexcept>
#include <string>

namespace fpcb {

enum class ErrorKind {
    dimension,
    numeric,
    singular_system,
    rank_zero,
    not_psd,
    degenerate_hull,
    domain,
    truncation,
    singular_covariance,
    stationarity,
    incompatible_operators,
    replicate_failure,
    calibration,
    parameter,
    io,
    parse,
    config,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::singular_system: return "singular-system";
        case ErrorKind::rank_zero: return "rank-zero";
        case ErrorKind::not_psd: return "not-psd";
        case ErrorKind::degenerate_hull: return "degenerate-hull";
        case ErrorKind::domain: return "domain";
        case ErrorKind::truncation: return "truncation";
        case ErrorKind::singular_covariance: return "singular-covariance";
        case ErrorKind::stationarity: return "stationarity";
        case ErrorKind::incompatible_operators: return "incompatible-operators";
        case ErrorKind::replicate_failure: return "replicate-failure";
        case ErrorKind::calibration: return "calibration";
        case ErrorKind::parameter: return "parameter";
        case ErrorKind::io: return "io";
        case ErrorKind::parse: return "parse";
        case ErrorKind::config: return "config";
    }
    return "unknown";
}

/// Every failure raised by the library carries a kind so callers (and the
/// CLI exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// CLI exit codes: 1 I/O or parse, 2 numeric/model, 3 config.
inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::io:
        case ErrorKind::parse: return 1;
        case ErrorKind::config: return 3;
        default: return 2;
    }
}

}  // namespace fpcb
