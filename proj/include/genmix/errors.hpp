#pragma once

#include <stdexcept>
#include <string>

namespace genmix {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent manifest content.
class ManifestError : public Error {
public:
    using Error::Error;
};

/// Image could not be decoded, encoded or has unusable dimensions.
class ImageError : public Error {
public:
    using Error::Error;
};

/// Argument outside an operation's domain (dimension mismatch, lambda range, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A transient backend failure; callers may retry.
class RetryableError : public Error {
public:
    RetryableError(const std::string& what, int status = 0) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

/// The remote peer violated the wire protocol. Not retried.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Non-retryable HTTP status, or retries exhausted.
class BackendError : public Error {
public:
    BackendError(const std::string& what, int status = 0) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

/// The directory backend has no edit for a (source, prompt) pair.
class MissingEdit : public Error {
public:
    MissingEdit(std::string source_id, std::string prompt_id)
        : Error("missing edit for (" + source_id + ", " + prompt_id + ")"),
          source_id_(std::move(source_id)),
          prompt_id_(std::move(prompt_id)) {}

    const std::string& source_id() const noexcept { return source_id_; }
    const std::string& prompt_id() const noexcept { return prompt_id_; }

private:
    std::string source_id_;
    std::string prompt_id_;
};

}  // namespace genmix
