#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tracer {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyContextError : public Error {
public:
    using Error::Error;
};

class UnparseableLabelError : public Error {
public:
    using Error::Error;
};

class MalformedListError : public Error {
public:
    using Error::Error;
};

class UnparseableAnswerError : public Error {
public:
    using Error::Error;
};

class AllZeroWeightsError : public Error {
public:
    using Error::Error;
};

class NotNormalizedError : public Error {
public:
    using Error::Error;
};

/// Raised when a prompt template placeholder has no binding.
class MissingBindingError : public Error {
public:
    explicit MissingBindingError(const std::string& placeholder)
        : Error("missing binding: {" + placeholder + "}"), placeholder_(placeholder) {}

    const std::string& placeholder() const { return placeholder_; }

private:
    std::string placeholder_;
};

class BackendError : public Error {
public:
    enum class Kind { Transient, Fatal, Timeout };

    BackendError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// The scripted backend has no entry matching a rendered prompt.
class ScriptMissError : public Error {
public:
    using Error::Error;
};

class StoreError : public Error {
public:
    using Error::Error;
};

/// Dataset validation failure, carrying the offending line and field.
class SchemaError : public Error {
public:
    SchemaError(std::size_t line, std::string field, std::string reason)
        : Error("schema error at line " + std::to_string(line) + ", field '" + field +
                "': " + reason),
          line_(line),
          field_(std::move(field)),
          reason_(std::move(reason)) {}

    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t line_;
    std::string field_;
    std::string reason_;
};

class DanglingPredictionError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

}  // namespace tracer
