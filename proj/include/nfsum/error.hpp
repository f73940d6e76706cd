#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nfsum {

enum class ErrorKind {
  kEmptyDomain,
  kUndefinedInput,
  kBadReduction,
  kCapacity,
  kParse,
  kIncompleteInput,
  kCoverage,
  kOverflow,
  kNonUnit,
  kRedirect,
  kUnsupportedModulus,
  kParameter,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kEmptyDomain: return "empty-domain";
    case ErrorKind::kUndefinedInput: return "undefined-input";
    case ErrorKind::kBadReduction: return "bad-reduction";
    case ErrorKind::kCapacity: return "capacity";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kIncompleteInput: return "incomplete-input";
    case ErrorKind::kCoverage: return "coverage";
    case ErrorKind::kOverflow: return "overflow";
    case ErrorKind::kNonUnit: return "non-unit";
    case ErrorKind::kRedirect: return "redirect";
    case ErrorKind::kUnsupportedModulus: return "unsupported-modulus";
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

// All library failures are reported through this type; `kind()` lets callers
// branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class BadReductionError : public Error {
 public:
  explicit BadReductionError(std::uint64_t p)
      : Error(ErrorKind::kBadReduction,
              "curve has bad reduction at p=" + std::to_string(p)),
        prime_(p) {}
  std::uint64_t prime() const noexcept { return prime_; }

 private:
  std::uint64_t prime_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::kParse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class OverflowError : public Error {
 public:
  OverflowError(std::uint64_t n, const std::string& what)
      : Error(ErrorKind::kOverflow,
              what + " overflows 128 bits at n=" + std::to_string(n)),
        n_(n) {}
  std::uint64_t index() const noexcept { return n_; }

 private:
  std::uint64_t n_;
};

}  // namespace nfsum
