#pragma once

#include <stdexcept>
#include <string>

namespace cpd {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Observation outside the support of a density.
class DomainError : public Error {
public:
    using Error::Error;
};

// Parameter outside its admissible set (theta not in Theta1, alpha not in (0,1), ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

// Operation invoked on a state that cannot serve it (empty window, exhausted pool).
class StateError : public Error {
public:
    using Error::Error;
};

// Non-finite or malformed input values.
class InputError : public Error {
public:
    using Error::Error;
};

// Family does not provide the requested quantity.
class CapabilityError : public Error {
public:
    using Error::Error;
};

// Singular matrices, non-converging quadrature, degenerate estimates.
class NumericError : public Error {
public:
    using Error::Error;
};

// Malformed configuration document.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace cpd
