// Error types shared across the library.

#pragma once

#include <stdexcept>
#include <string>

namespace textseg {

// Dimension / layout violations (mismatched tensor shapes, bad image sizes).
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid numeric content or argument domain (NaN inputs, alpha out of range).
struct ValueError : std::runtime_error {
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / serialization failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace textseg
