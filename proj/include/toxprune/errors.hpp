#pragma once

#include <stdexcept>
#include <string>

namespace toxprune {

// Error categories map to CLI exit codes: validation -> 2, data -> 3,
// internal -> 4.
enum class ErrorKind { validation, data, internal };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what),
        kind_(kind),
        code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

private:
  ErrorKind kind_;
  std::string code_;
};

inline Error validation_error(const std::string& code, const std::string& msg) {
  return Error(ErrorKind::validation, code, msg);
}
inline Error data_error(const std::string& code, const std::string& msg) {
  return Error(ErrorKind::data, code, msg);
}
inline Error internal_error(const std::string& code, const std::string& msg) {
  return Error(ErrorKind::internal, code, msg);
}

}  // namespace toxprune
