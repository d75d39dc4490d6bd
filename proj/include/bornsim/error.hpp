#pragma once

#include <stdexcept>
#include <string>

namespace bornsim {

// Invalid parameters, mismatched lengths, malformed configuration input.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Argument outside the mathematical domain of a function (e.g. Xi <= 0).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Request exceeds a hard size limit (exhaustive enumeration beyond 2^16 configs).
class CapacityError : public std::length_error {
 public:
  explicit CapacityError(const std::string& what) : std::length_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bornsim
