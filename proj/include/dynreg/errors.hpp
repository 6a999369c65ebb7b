#pragma once

#include <stdexcept>
#include <string>

namespace dynreg {

/// Bad numeric or structural parameter (non-positive voxel, empty config, ...).
class InvalidParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Inputs violate an operation precondition (mismatched lengths, frame ids, ...).
class InvalidInputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed file content. Messages carry the path and a 1-based line or byte position.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Geometry too poor to constrain a pose (rank-deficient cross-covariance).
class DegenerateInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No usable correspondences between the two clouds.
class NoOverlapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values encountered inside an optimizer.
class NumericalFailureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyIndexError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dynreg
