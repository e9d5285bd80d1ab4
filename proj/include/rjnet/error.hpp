#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rjnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: network specs, datasets, configs. Carries every violation found.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

// Step-count exhaustion or a non-finite/negative state during an ODE solve.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

// Model space too large for exhaustive enumeration.
class EnumerationCapExceeded : public Error {
 public:
  using Error::Error;
};

// Failure to build a between-model proposal (optimizer or Hessian breakdown).
class ProposalError : public Error {
 public:
  using Error::Error;
};

}  // namespace rjnet
