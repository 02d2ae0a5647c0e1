#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace neolink {

using NodeId = std::int32_t;

// Malformed or inconsistent input data (bad edge list, mismatched dims, ...).
// The CLI maps this to exit code 3.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure (NaN loss, non-finite gradient, ...). CLI exit code 4.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace neolink
