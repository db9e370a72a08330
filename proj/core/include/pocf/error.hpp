#pragma once

#include <stdexcept>
#include <string>

namespace pocf {

/// Base class for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape/dimension mismatch between tensors.
struct dim_error : error {
    using error::error;
};

/// Non-finite values where finite ones are required.
struct numeric_error : error {
    using error::error;
};

/// Violated precondition or invariant.
struct contract_error : error {
    using error::error;
};

/// Filesystem / stream failure.
struct io_error : error {
    using error::error;
};

/// Malformed file contents (bad magic, truncated payload, unknown format).
struct format_error : error {
    using error::error;
};

}  // namespace pocf
