#include "trialmatch/error.hpp"

namespace trialmatch {

std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::MalformedXml: return "MalformedXml";
        case Errc::MissingIdentifier: return "MissingIdentifier";
        case Errc::MalformedJson: return "MalformedJson";
        case Errc::MissingSubjectId: return "MissingSubjectId";
        case Errc::AugmenterUnavailable: return "AugmenterUnavailable";
        case Errc::AugmenterMalformedOutput: return "AugmenterMalformedOutput";
        case Errc::DuplicateDocId: return "DuplicateDocId";
        case Errc::UnknownDocId: return "UnknownDocId";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::IndexFinalized: return "IndexFinalized";
        case Errc::IndexFormat: return "IndexFormat";
        case Errc::BackendUnavailable: return "BackendUnavailable";
        case Errc::Timeout: return "Timeout";
        case Errc::TextTooLong: return "TextTooLong";
        case Errc::EmptyBundle: return "EmptyBundle";
        case Errc::JudgeUnavailable: return "JudgeUnavailable";
        case Errc::ReasonerUnavailable: return "ReasonerUnavailable";
        case Errc::MalformedLine: return "MalformedLine";
        case Errc::InvalidGrade: return "InvalidGrade";
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace trialmatch
