#pragma once

#include <stdexcept>
#include <string>

namespace mp {

// Base type for everything thrown by this library.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unreadable on-disk data. Messages carry a location
// (line number or byte count) whenever one exists.
class io_error : public error {
 public:
  explicit io_error(const std::string& msg) : error(msg) {}
};

// Inputs violating a documented precondition: non-monotone timestamps,
// missing sensor stream, shape mismatch, coverage gaps.
class validation_error : public error {
 public:
  explicit validation_error(const std::string& msg) : error(msg) {}
};

// Numerical breakdown, e.g. factorization failure after jitter escalation.
class numerical_error : public error {
 public:
  explicit numerical_error(const std::string& msg) : error(msg) {}
};

}  // namespace mp
