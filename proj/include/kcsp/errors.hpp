#pragma once

#include <stdexcept>
#include <string>

namespace kcsp {

/// Argument outside the documented domain of an operation.
struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// An inverse problem has no solution for the requested value.
struct no_solution : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An iterative method ran out of iterations or stalled.
struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A hard size guard was hit (enumeration, backtracking).
struct size_guard : std::length_error {
    using std::length_error::length_error;
};

/// A solver ran past its wall-clock deadline.
struct deadline_exceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace kcsp
