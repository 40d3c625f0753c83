#pragma once

#include <stdexcept>
#include <string>

namespace ldp {

// Bad user-supplied configuration (files, ranges, unknown keys). CLI exit 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller violated an operation precondition (shape mismatch, bad scale).
struct ArgumentError : std::runtime_error {
    explicit ArgumentError(const std::string& msg) : std::runtime_error(msg) {}
};

// A denoiser/decoder/encoder call failed; message names the failing call.
struct BackendError : std::runtime_error {
    explicit BackendError(const std::string& msg) : std::runtime_error(msg) {}
};

// Weights missing or unreadable; message names the path.
struct LoadError : std::runtime_error {
    explicit LoadError(const std::string& msg) : std::runtime_error(msg) {}
};

// Degenerate numeric state (sigma_t = 0, variance below floor in strict mode).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Optimization run aborted (NaN/Inf gradient); carries the offending iteration.
struct RunAborted : std::runtime_error {
    int iteration;
    RunAborted(int iter, const std::string& msg)
        : std::runtime_error("iteration " + std::to_string(iter) + ": " + msg), iteration(iter) {}
};

}  // namespace ldp
