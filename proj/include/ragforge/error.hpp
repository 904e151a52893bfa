#pragma once

#include <stdexcept>
#include <string>

namespace ragforge {

/// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller supplied bad input (bad flag value, rating out of range, missing placeholder binding).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A referenced entity (session, turn, document) does not exist.
class NotFoundError : public Error {
public:
    using Error::Error;
};

/// On-disk data does not match the expected format.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure; message carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

/// An LLM, embedding or judge backend failed.
class ProviderError : public Error {
public:
    using Error::Error;
};

} // namespace ragforge
