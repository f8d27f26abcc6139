#pragma once

#include <stdexcept>
#include <string>

namespace judgekit {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// A document violates its declared schema or a type invariant.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A context could not be assembled (budget exceeded, empty answer,
/// mismatched labels or stages).
class PromptError : public Error {
public:
    using Error::Error;
};

/// Judge invocation failed (timeout after retries, protocol error,
/// unscripted request, empty completion).
class BackendError : public Error {
public:
    using Error::Error;
};

/// A completion could not be parsed into a verdict. Carries the raw
/// completion text for inspection.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::string raw_text)
        : Error(message), raw_text_(std::move(raw_text)) {}

    const std::string& raw_text() const { return raw_text_; }

private:
    std::string raw_text_;
};

/// A metric is undefined for the given input (constant vector, empty
/// alignment). Deliberately an error rather than a silent 0.
class MetricError : public Error {
public:
    using Error::Error;
};

}  // namespace judgekit
