#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace specfit {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad inputs: malformed files, violated preconditions, mismatched grids.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Inputs that are well-formed but numerically unusable.
class NumericalError : public Error {
public:
    using Error::Error;
};

class RankDeficient : public NumericalError {
public:
    RankDeficient(std::size_t basis_index, const std::string& what)
        : NumericalError(what), basis_index_(basis_index) {}

    // Row of the basis whose pivot fell below tolerance.
    std::size_t basis_index() const noexcept { return basis_index_; }

private:
    std::size_t basis_index_;
};

class NotPositiveDefinite : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace specfit
