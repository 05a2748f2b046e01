#include "digdeeper/error.hpp"

namespace digdeeper {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::Io: return "io";
        case ErrorCode::Config: return "config";
        case ErrorCode::Format: return "format";
        case ErrorCode::Parse: return "parse";
        case ErrorCode::DuplicateId: return "duplicate_id";
        case ErrorCode::MissingField: return "missing_field";
        case ErrorCode::Precondition: return "precondition";
        case ErrorCode::NotFound: return "not_found";
        case ErrorCode::DimensionMismatch: return "dimension_mismatch";
        case ErrorCode::MissingPlaceholder: return "missing_placeholder";
        case ErrorCode::Transient: return "transient";
        case ErrorCode::Auth: return "auth";
        case ErrorCode::Backend: return "backend";
        case ErrorCode::EmptyCompletion: return "empty_completion";
        case ErrorCode::Unparsable: return "unparsable";
    }
    return "unknown";
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::Io:
        case ErrorCode::Config:
        case ErrorCode::Format:
            return 2;
        default:
            return 1;
    }
}

}  // namespace digdeeper
