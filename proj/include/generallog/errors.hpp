#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace generallog {

enum class ErrorCode {
    EmptyLine,
    MalformedHeader,
    LengthMismatch,
    EmptyCorpus,
    UnknownTemplate,
    EmptySequence,
    DimensionMismatch,
    EmptyIndex,
    ShapeMismatch,
    NonFinite,
    InsufficientData,
    OneDomainOnly,
    NoLabels,
    DivergedTask,
    MetaStepFailed,
    UnparseableVerdict,
    Transport,
    InconsistentSpec,
    InvalidArgument,
    Config,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace generallog
