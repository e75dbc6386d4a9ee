#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ppcshape {

// Argument outside an operation's domain (wrong arity, unknown level, bad range).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Experiment or solver configuration that cannot be run as given.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Enumeration or allocation guard exceeded.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class PeakConstraintError : public std::runtime_error {
 public:
  PeakConstraintError(std::size_t index, double value, double peak)
      : std::runtime_error("symbol " + std::to_string(index) + " has amplitude " +
                           std::to_string(value) + " above peak " + std::to_string(peak)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace ppcshape
