#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trialmatch {

enum class Errc {
    MalformedXml,
    MissingIdentifier,
    MalformedJson,
    MissingSubjectId,
    AugmenterUnavailable,
    AugmenterMalformedOutput,
    DuplicateDocId,
    UnknownDocId,
    DimensionMismatch,
    IndexFinalized,
    IndexFormat,
    BackendUnavailable,
    Timeout,
    TextTooLong,
    EmptyBundle,
    JudgeUnavailable,
    ReasonerUnavailable,
    MalformedLine,
    InvalidGrade,
    InvalidArgument,
    Io,
};

std::string_view to_string(Errc code);

/// Every failure surfaced by the engine carries one of the codes above so the
/// CLI can report it as machine-readable JSON.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace trialmatch
