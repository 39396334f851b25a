#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace icl {

/// Malformed serialized payload. Carries the byte offset at which parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

/// Numerical failure (non-finite values, convergence failure, overflow).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Training loop diverged. Carries the epoch at which the loss became non-finite.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, int epoch)
        : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

    int epoch() const { return epoch_; }

private:
    int epoch_;
};

} // namespace icl
