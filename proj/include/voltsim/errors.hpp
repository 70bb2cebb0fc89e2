#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace voltsim {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Requested supply voltage is below the crash threshold; a real board stops
// responding there, so no data is produced.
class CrashRegion : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class CapacityExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace voltsim
