#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hdc {

// Violated precondition: bad shapes, out-of-range arguments, malformed inputs.
class ContractError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite values, degenerate matrices, failed convergence.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Missing or unreadable files.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Well-formedness failure inside a file; carries the byte offset where it was detected.
class FormatError : public std::runtime_error {
  public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

  private:
    std::uint64_t offset_;
};

}  // namespace hdc
