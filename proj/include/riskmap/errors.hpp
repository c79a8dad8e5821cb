#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace riskmap {

// Argument outside the mathematical domain of an operation (negative count,
// non-positive rate, correlation outside (-1, 1), ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller violated a structural precondition (dimension mismatch, asymmetric
// adjacency, empty input).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Model configuration that cannot define a valid distribution.
class ModelSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite objective, failed factorization, or a sampler that cannot move.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries the 1-based line number when one applies.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(format(file, line, what)), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& file, std::size_t line,
                            const std::string& what) {
    std::string out = file;
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + what;
  }

  std::string file_;
  std::size_t line_;
};

}  // namespace riskmap
