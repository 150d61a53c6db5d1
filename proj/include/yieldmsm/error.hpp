#pragma once

#include <stdexcept>
#include <string>

namespace yieldmsm {

/// Malformed or inconsistent input: config, CSV, covariate names, dimensions.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a valid result (non-finite objective,
/// invalid generator, impossible observed transition, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace yieldmsm
