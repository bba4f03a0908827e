#pragma once

#include <stdexcept>
#include <string>

namespace nkdcd {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operand dimensions do not line up, or an input has the wrong length.
struct ShapeError : Error {
    using Error::Error;
};

/// Invalid configuration, argument values, or violated call contracts.
struct ValidationError : Error {
    using Error::Error;
};

/// Numeric failure: non-finite state, undefined metric, integration blowup.
struct NumericError : Error {
    using Error::Error;
};

/// Training left the finite regime. Carries the epoch where it happened.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& msg, long long epoch = -1)
        : NumericError(msg), epoch_(epoch) {}
    long long epoch() const noexcept { return epoch_; }

private:
    long long epoch_;
};

/// File parsing or filesystem failure.
struct IoError : Error {
    using Error::Error;
};

} // namespace nkdcd
