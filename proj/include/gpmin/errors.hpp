#pragma once

#include <stdexcept>
#include <string>

namespace gpmin {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Raised when an iterative method runs out of budget or its linear algebra breaks down.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// The optimal measure does not look finitely supported (continuous minimizer).
class DegenerateSupport : public Error {
public:
    using Error::Error;
};

/// Asymptotic constant is not available because the nondegeneracy condition fails.
class DegenerateConfiguration : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string &message) {
    if (!ok) { throw InvalidArgument(message); }
}

}  // namespace detail
}  // namespace gpmin
