#pragma once

#include <stdexcept>
#include <string>

namespace olbench {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (model text, IDX, CSV, config).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Structurally well-formed input that violates a semantic invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The classification head would grow past its configured class cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

}  // namespace olbench
