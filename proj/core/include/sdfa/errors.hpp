#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace sdfa {

// Error taxonomy shared across the library. The CLI maps UsageError to exit
// code 2 and every other Error to exit code 1, printing `error: <kind>: <msg>`
// on a single line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define SDFA_ERROR_TYPE(NAME, KIND)                                  \
  class NAME : public Error {                                        \
   public:                                                           \
    explicit NAME(const std::string& msg) : Error(KIND, msg) {}      \
  }

SDFA_ERROR_TYPE(ParseError, "parse");      // malformed input documents
SDFA_ERROR_TYPE(ConfigError, "config");    // invalid configuration values
SDFA_ERROR_TYPE(DataError, "data");        // bad runtime data (labels, lengths, batches)
SDFA_ERROR_TYPE(ShapeError, "shape");      // tensor/matrix shape mismatches
SDFA_ERROR_TYPE(SplitError, "split");      // evaluation-protocol partition failures
SDFA_ERROR_TYPE(TrainError, "train");      // training-loop preconditions
SDFA_ERROR_TYPE(UsageError, "usage");      // API misuse (e.g. backward before forward)
SDFA_ERROR_TYPE(InternalError, "internal");

#undef SDFA_ERROR_TYPE

}  // namespace sdfa
