#pragma once

#include <stdexcept>
#include <string>

namespace rlstat {

// Base class for every failure raised by the library. The message is prefixed
// with the module that raised it, e.g. "[regress] singular Gram matrix".
class Error : public std::runtime_error {
 public:
  Error(const std::string& module, const std::string& what)
      : std::runtime_error("[" + module + "] " + what), module_(module) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

// Invalid arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Input data does not satisfy a documented precondition.
class DataError : public Error {
 public:
  using Error::Error;
};

// A numerical procedure failed (rank deficiency, non-finite values, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace rlstat
