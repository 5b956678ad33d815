#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace regime_bench {

/// Base class for every error raised by the harness.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input row. `line()` is 1-based and counts the header.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class OrderingError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class EmptyEpisodeError : public Error {
public:
    using Error::Error;
};

class EstimationError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public FitError {
public:
    ConvergenceError(const std::string& what, double residual_norm)
        : FitError(what + " (residual norm " + std::to_string(residual_norm) + ")"),
          residual_norm_(residual_norm) {}
    double residual_norm() const noexcept { return residual_norm_; }

private:
    double residual_norm_;
};

/// Not enough stable coverage to reach the requested masking ratio.
class AllocationError : public Error {
public:
    AllocationError(const std::string& what, double max_ratio)
        : Error(what + " (achievable maximum ratio " + std::to_string(max_ratio) + ")"),
          max_ratio_(max_ratio) {}
    double max_ratio() const noexcept { return max_ratio_; }

private:
    double max_ratio_;
};

class SelectionError : public Error {
public:
    using Error::Error;
};

class MetricDomainError : public Error {
public:
    using Error::Error;
};

class CoverageError : public Error {
public:
    using Error::Error;
};

class IntegrityError : public Error {
public:
    using Error::Error;
};

class RoutingError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace regime_bench
