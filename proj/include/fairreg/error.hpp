#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fairreg {

// Coarse failure classes; the CLI maps them to exit codes and the
// machine-readable error line.
enum class ErrorCategory { input, parse, io, config, runtime };

std::string_view to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& message)
      : Error(ErrorCategory::parse,
              path + ":" + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

[[noreturn]] inline void input_error(const std::string& message) {
  throw Error(ErrorCategory::input, message);
}

}  // namespace fairreg
