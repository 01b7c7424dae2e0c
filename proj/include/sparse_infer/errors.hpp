#pragma once

#include <stdexcept>
#include <string>

namespace sparse_infer {

/// Bad input: malformed data, violated preconditions, out-of-range options.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation could not produce a valid result (non-convergence,
/// singular systems, degenerate criteria).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sparse_infer
