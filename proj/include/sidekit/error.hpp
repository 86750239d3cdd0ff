#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sidekit {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A NaN or infinity appeared where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A precondition on an argument value was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed file or stream. `offset()` is the byte position where decoding stopped.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

/// Training hit a non-finite loss or gradient. The model has been restored to
/// the parameters of the last completed step.
class TrainingError : public NumericError {
public:
    TrainingError(const std::string& what, std::size_t epoch, std::size_t step)
        : NumericError(what + " (epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ")"),
          epoch_(epoch),
          step_(step) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t epoch_;
    std::size_t step_;
};

}  // namespace sidekit
