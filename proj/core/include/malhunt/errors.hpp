#pragma once

#include <stdexcept>
#include <string>

namespace malhunt {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input failed a documented precondition or invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class StorageError : public Error {
public:
    using Error::Error;
};

class EmptyKeywordSet : public ValidationError {
public:
    EmptyKeywordSet() : ValidationError("keyword set is empty") {}
};

/// Training data lacks one of the two classes.
class DegenerateCorpus : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InvalidAlpha : public ValidationError {
public:
    explicit InvalidAlpha(double alpha)
        : ValidationError("smoothing alpha must be > 0, got " + std::to_string(alpha)) {}
};

class WidthMismatch : public ValidationError {
public:
    WidthMismatch(std::size_t expected, std::size_t actual)
        : ValidationError("feature vector width " + std::to_string(actual) + " does not match model width " +
                          std::to_string(expected)) {}
};

class TooFewExamples : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EmptyInput : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DegenerateInput : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class UnknownRepo : public ValidationError {
public:
    explicit UnknownRepo(const std::string& name) : ValidationError("unknown repository: " + name) {}
};

class UnknownJudge : public ValidationError {
public:
    explicit UnknownJudge(const std::string& id) : ValidationError("unknown judge: " + id) {}
};

/// Non-success archive response. `transient()` marks retryable statuses.
class ApiError : public Error {
public:
    ApiError(int status, const std::string& what) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }
    bool transient() const noexcept { return status_ == 0 || status_ == 429 || status_ >= 500; }

private:
    int status_;
};

class AuthError : public ApiError {
public:
    AuthError(int status, const std::string& what) : ApiError(status, what) {}
};

/// Repository was deleted or blocked by the archive. Never retried.
class GoneError : public ApiError {
public:
    GoneError(int status, const std::string& what) : ApiError(status, what) {}
};

}  // namespace malhunt
