#pragma once

#include <stdexcept>
#include <string>

namespace padapt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Array shapes that should agree do not.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A file could not be parsed (bad magic, truncated payload, wrong dtype...).
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, long iteration)
        : Error(what), iteration_(iteration) {}
    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

}  // namespace padapt
