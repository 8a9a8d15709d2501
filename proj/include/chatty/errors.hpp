#pragma once

#include <stdexcept>
#include <string>

namespace chatty {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Matrix dimensions do not fit the operation. The message names both shapes.
struct ShapeError : Error {
    using Error::Error;
};

/// Input values outside the mathematical domain of the operation.
struct DomainError : Error {
    using Error::Error;
};

/// Invalid configuration or hyperparameter value.
struct ParamError : Error {
    using Error::Error;
};

/// API misuse, e.g. backward called twice without a grad reset.
struct StateError : Error {
    using Error::Error;
};

/// Out-of-range index, e.g. a class label outside [0, c).
struct IndexError : Error {
    using Error::Error;
};

/// A loss turned non-finite during training; carries the offending term.
struct NanAbort : Error {
    explicit NanAbort(const std::string& term)
        : Error("non-finite value in loss term '" + term + "'"), term_(term) {}
    const std::string& term() const { return term_; }

  private:
    std::string term_;
};

}  // namespace chatty
