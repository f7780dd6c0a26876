#pragma once

#include <stdexcept>
#include <string>

namespace scopex {

// Domain error taxonomy. Every throwing operation in the library raises
// Error with one of these kinds; the CLI maps any Error to exit code 1.
enum class ErrorKind {
    InvalidInput,
    DimensionMismatch,
    DegenerateEmbedding,
    NotFound,
    ExtensionEmpty,
    NoGeneralization,
    AlreadyCommon,
    CycleDetected,
    IdentityCollision,
    DegenerateDistribution,
    OutcomeMismatch,
    EntropyBoundViolated,
    GatewayError,
    NoRule,
    ParseError,
    InvalidStrategy,
    IoError,
    ConfigError,
};

inline const char* kind_label(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::DimensionMismatch: return "dimension-mismatch";
        case ErrorKind::DegenerateEmbedding: return "degenerate-embedding";
        case ErrorKind::NotFound: return "not-found";
        case ErrorKind::ExtensionEmpty: return "extension-empty";
        case ErrorKind::NoGeneralization: return "no-generalization";
        case ErrorKind::AlreadyCommon: return "already-common";
        case ErrorKind::CycleDetected: return "cycle-detected";
        case ErrorKind::IdentityCollision: return "identity-collision";
        case ErrorKind::DegenerateDistribution: return "degenerate-distribution";
        case ErrorKind::OutcomeMismatch: return "outcome-mismatch";
        case ErrorKind::EntropyBoundViolated: return "entropy-bound-violated";
        case ErrorKind::GatewayError: return "gateway-error";
        case ErrorKind::NoRule: return "no-rule";
        case ErrorKind::ParseError: return "parse-error";
        case ErrorKind::InvalidStrategy: return "invalid-strategy";
        case ErrorKind::IoError: return "io-error";
        case ErrorKind::ConfigError: return "config-error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(kind_label(kind)) + ": " + message),
          kind_(kind),
          message_(message) {}

    ErrorKind kind() const noexcept { return kind_; }

    // The message without the "<kind>: " prefix that what() carries.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

}  // namespace scopex
