#pragma once

#include <stdexcept>
#include <string>

namespace noisedetect {

enum class ErrorCode {
    ParseError,
    SchemaError,
    LabelError,
    StratumTooSmall,
    MissingLabel,
    EmptyText,
    EmptyDataset,
    EmptyVocabulary,
    LexiconRequired,
    LexiconParseError,
    InvalidSpec,
    SingleClassError,
    UnlabeledDocument,
    ClassMismatch,
    IoError,
    FormatVersionError,
    DigestMismatch,
    ClassSetMismatch,
    MemberLoadError,
    LengthMismatch,
    UnknownLabel,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::LabelError: return "LabelError";
        case ErrorCode::StratumTooSmall: return "StratumTooSmall";
        case ErrorCode::MissingLabel: return "MissingLabel";
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::EmptyVocabulary: return "EmptyVocabulary";
        case ErrorCode::LexiconRequired: return "LexiconRequired";
        case ErrorCode::LexiconParseError: return "LexiconParseError";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::SingleClassError: return "SingleClassError";
        case ErrorCode::UnlabeledDocument: return "UnlabeledDocument";
        case ErrorCode::ClassMismatch: return "ClassMismatch";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::FormatVersionError: return "FormatVersionError";
        case ErrorCode::DigestMismatch: return "DigestMismatch";
        case ErrorCode::ClassSetMismatch: return "ClassSetMismatch";
        case ErrorCode::MemberLoadError: return "MemberLoadError";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::UnknownLabel: return "UnknownLabel";
    }
    return "UnknownError";
}

/// Single exception type for the whole toolkit; the code tells callers (and
/// tests) which contract was violated, the message carries the specifics.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace noisedetect
