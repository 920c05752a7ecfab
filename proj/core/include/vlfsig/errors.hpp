#pragma once

#include <stdexcept>
#include <string>

namespace vlfsig {

// Bad configuration or bad arguments caught before any work starts. CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor dimension mismatch; message names both shapes.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse such as backward on a consumed graph or a non-scalar loss.
class StateError : public std::runtime_error {
public:
    explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failure (open/write). CLI exit code 2.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file contents; carries the byte offset of the problem. CLI exit code 2.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t byte_offset)
        : std::runtime_error(msg + " (at byte " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}
    explicit ParseError(const std::string& msg) : std::runtime_error(msg), offset_(0) {}
    std::size_t byte_offset() const { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace vlfsig
