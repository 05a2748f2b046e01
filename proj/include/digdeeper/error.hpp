#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace digdeeper {

enum class ErrorCode {
    Io,
    Config,
    Format,
    Parse,
    DuplicateId,
    MissingField,
    Precondition,
    NotFound,
    DimensionMismatch,
    MissingPlaceholder,
    Transient,
    Auth,
    Backend,
    EmptyCompletion,
    Unparsable,
};

std::string_view to_string(ErrorCode code);

/// Base error for the whole library. The code decides the CLI exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class DuplicateId : public Error {
public:
    explicit DuplicateId(std::string id)
        : Error(ErrorCode::DuplicateId, "duplicate lesson id: " + id), id_(std::move(id)) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class MissingPlaceholder : public Error {
public:
    explicit MissingPlaceholder(std::string name)
        : Error(ErrorCode::MissingPlaceholder, "missing placeholder: " + name),
          name_(std::move(name)) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

/// Structured output that never validated. Carries the last raw completion.
class UnparsableVerdict : public Error {
public:
    UnparsableVerdict(std::string raw, int attempts, const std::string& last_error)
        : Error(ErrorCode::Unparsable,
                "unparsable structured output after " + std::to_string(attempts) +
                    " attempts: " + last_error),
          raw_(std::move(raw)), attempts_(attempts) {}
    const std::string& raw() const noexcept { return raw_; }
    int attempts() const noexcept { return attempts_; }

private:
    std::string raw_;
    int attempts_;
};

/// 0 success, 1 domain error, 2 I/O or configuration error.
int exit_code_for(ErrorCode code);

}  // namespace digdeeper
