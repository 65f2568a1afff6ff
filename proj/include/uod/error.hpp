#pragma once

#include <stdexcept>
#include <string>

namespace uod {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A record or argument violates a documented invariant; field() names it.
class InvariantError : public Error {
public:
    InvariantError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

enum class FormatErrorKind { io, bad_magic, version_mismatch, truncated, trailing_bytes };

class FormatError : public Error {
public:
    FormatError(FormatErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
    FormatErrorKind kind() const noexcept { return kind_; }

private:
    FormatErrorKind kind_;
};

class EigenSolverError : public Error {
public:
    EigenSolverError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// Dataset-level failure that stops the pipeline (e.g. every cluster labelled background).
class PipelineError : public Error {
public:
    using Error::Error;
};

}  // namespace uod
