#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace factsum {

enum class ErrorKind {
    // core_model
    EmptyClaim,
    EmptyContext,
    MissingField,
    InvalidValue,
    // tokenizer_chunker
    TurnExceedsBudget,
    // llm_gateway
    TransportError,
    MockExhausted,
    MockScriptMismatch,
    RepairExhausted,
    // stages
    UnknownFactReference,
    CountMismatch,
    OutlineEmpty,
    TierViolation,
    SelectionEmpty,
    // statistics
    LengthMismatch,
    Undefined,
    // operator input
    InputError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; `kind()` drives recovery and exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

} // namespace factsum
