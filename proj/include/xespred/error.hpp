#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xespred {

enum class ErrorKind {
  parse,             // malformed XML / TOML / JSON input
  schema,            // declarations, classifiers, attribute selection
  incomplete_event,  // missing attribute at join or encode time
  unsupported,       // construct outside the supported subset
  unknown_value,     // categorical value absent from a vocabulary
  monotonicity,      // decreasing timestamps inside a trace
  insufficient_data, // stream too short for the batch layout
  range,             // index outside a valid range
  shape,             // dimension mismatch
  numeric,           // non-finite values
  no_signal,         // loss with every position masked
  state,             // misuse of a consumed cache or similar
  format,            // frozen model magic / version / checksum
  io,
  config,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace xespred
