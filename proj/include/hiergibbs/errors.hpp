#pragma once

#include <stdexcept>
#include <string>

namespace hiergibbs {

// Structural or numerical problems with a model (bad tree, non-PD precision).
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// Bad CLI flags, config files, or model spec files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hiergibbs
