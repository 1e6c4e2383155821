#pragma once

#include <stdexcept>
#include <string>

namespace durian {

enum class ErrorKind {
  invalid_input,
  degenerate_input,
  degenerate_spectrum,
  convergence,
  empty_input,
  empty_group,
  degenerate_group,
  degenerate_response,
  inconsistent_assignment,
  invalid_config,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::degenerate_input: return "degenerate input";
    case ErrorKind::degenerate_spectrum: return "degenerate spectrum";
    case ErrorKind::convergence: return "convergence failure";
    case ErrorKind::empty_input: return "empty input";
    case ErrorKind::empty_group: return "empty group";
    case ErrorKind::degenerate_group: return "degenerate group";
    case ErrorKind::degenerate_response: return "degenerate response";
    case ErrorKind::inconsistent_assignment: return "inconsistent assignment";
    case ErrorKind::invalid_config: return "invalid config";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace durian
