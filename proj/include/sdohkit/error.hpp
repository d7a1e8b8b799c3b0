#pragma once

#include <stdexcept>
#include <string>

namespace sdohkit {

enum class ErrorKind {
    InvalidValue,   // non-finite or out-of-window numeric input
    EmptyInput,     // operation requires at least one element
    Config,         // bad configuration or dangling reference
    Template,       // missing placeholder binding
    Parse,          // response text has no usable structure
    Input,          // malformed or inconsistent input data
    Alignment,      // patient ids do not line up across inputs
    Imputation,     // column cannot be imputed
    Prediction,     // feature schema mismatch at predict time
    UndefinedStat,  // statistic undefined for this input (e.g. constant y)
    Transport,      // retries exhausted or connection-level failure
    Backend,        // non-retryable backend response
    Redaction,      // residual A1C content after redaction
    Dependency,     // required upstream stage artifact missing
    Io,             // filesystem failure
};

inline const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::InvalidValue: return "invalid-value";
        case ErrorKind::EmptyInput: return "empty-input";
        case ErrorKind::Config: return "config";
        case ErrorKind::Template: return "template";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Input: return "input";
        case ErrorKind::Alignment: return "alignment";
        case ErrorKind::Imputation: return "imputation";
        case ErrorKind::Prediction: return "prediction";
        case ErrorKind::UndefinedStat: return "undefined-stat";
        case ErrorKind::Transport: return "transport";
        case ErrorKind::Backend: return "backend";
        case ErrorKind::Redaction: return "redaction";
        case ErrorKind::Dependency: return "dependency";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
          kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace sdohkit
