#pragma once

#include <stdexcept>
#include <string>

namespace pipehmm {

// Filesystem and parse failures. The CLI maps this to exit code 3.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// An algorithm could not continue numerically (no support under the model,
// failed factorization, non-convergence). The CLI maps this to exit code 4.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid inputs and configuration errors are reported as
// std::invalid_argument and map to exit code 2.

}  // namespace pipehmm
