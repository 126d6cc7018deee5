#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace deltalab {

/// Every failure raised by the library carries a short error name
/// ("InvalidParams", "ReplayMiss", ...) plus a human-readable detail.
/// The CLI prints the name on stderr so scripts can match on it.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& detail)
      : std::runtime_error(name + ": " + detail), name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Errors that reflect bad command-line usage rather than bad data.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& detail) : Error("UsageError", detail) {}
};

}  // namespace deltalab
