#pragma once

#include <stdexcept>
#include <string>

namespace depthvote {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two inputs that must share dimensions do not.
class ShapeMismatch : public Error {
public:
    using Error::Error;
};

/// Input is well-formed but numerically degenerate (e.g. a constant disparity
/// map leaves the global scale undefined).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

/// Input violates an operation's domain (negative disparity, NaN, empty overlap).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Malformed or unsupported file content.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace depthvote
