#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace obtain {

/// Malformed input container (bad RIFF header, truncated chunk, ...).
/// Carries the byte offset at which parsing failed.
class DecodeError : public std::runtime_error {
public:
    DecodeError(const std::string& msg, std::size_t byte_offset)
        : std::runtime_error(msg + " (at byte " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

/// Well-formed container, but a codec/layout we do not handle.
class UnsupportedFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller handed an operation data that violates its precondition
/// (length mismatch, non-finite sample, ...).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A metric was requested on inputs for which it is undefined
/// (empty reference, fewer than two annotations, ...).
class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace obtain
