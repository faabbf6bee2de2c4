#ifndef MDRAFT_ERROR_HPP
#define MDRAFT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mdraft {

// Base for all library errors. Subclasses exist where callers need to
// distinguish failure modes; everything else throws this directly.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyInput : Error {
  explicit EmptyInput(const std::string& what) : Error(what) {}
};

struct BadIndex : Error {
  explicit BadIndex(const std::string& what) : Error(what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(what) {}
};

struct EmptyBatch : Error {
  explicit EmptyBatch(const std::string& what) : Error(what) {}
};

struct NonFiniteLoss : Error {
  explicit NonFiniteLoss(const std::string& what) : Error(what) {}
};

}  // namespace mdraft

#endif  // MDRAFT_ERROR_HPP
