#pragma once

#include <stdexcept>
#include <string>

namespace dautomap {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or grid shapes do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (even kernel, bad flag, image smaller than a window).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A request would exceed a memory guard.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Violated API contract (non-scalar loss, unknown variable id).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated file. Carries the byte offset where decoding failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Mask generation could not reach its target sampling fraction.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double best_fraction)
        : Error(what + " (best fraction " + std::to_string(best_fraction) + ")"),
          best_fraction_(best_fraction) {}

    double best_fraction() const noexcept { return best_fraction_; }

private:
    double best_fraction_;
};

/// Mask parameters that cannot be realised on the grid.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or gradient during optimisation.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Metric is mathematically undefined for the given inputs.
class MetricError : public Error {
public:
    using Error::Error;
};

/// Statistical test has no information (all paired differences zero).
class DegenerateError : public Error {
public:
    using Error::Error;
};

}  // namespace dautomap
