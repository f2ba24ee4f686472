#ifndef EFISH_ERRORS_HPP_
#define EFISH_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace efish {

// Invalid experiment configuration (bad value, unknown key, impossible arena).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller violated an API precondition (shape mismatch, non-finite input).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// File-level failure: missing file, bad magic, truncation, hash mismatch.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace efish

#endif  // EFISH_ERRORS_HPP_
