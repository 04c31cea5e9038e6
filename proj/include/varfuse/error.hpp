#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace varfuse {

// Error categories; the CLI maps these to exit codes.
enum class ErrorKind { config, io, parse, transport };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(std::string m) : Error(ErrorKind::config, std::move(m)) {}
};

struct IoError : Error {
  explicit IoError(std::string m) : Error(ErrorKind::io, std::move(m)) {}
};

struct ParseError : Error {
  explicit ParseError(std::string m) : Error(ErrorKind::parse, std::move(m)) {}
};

// Binary artifacts with a bad magic, version, or truncated payload.
struct FormatError : Error {
  explicit FormatError(std::string m) : Error(ErrorKind::parse, std::move(m)) {}
};

struct TransportError : Error {
  explicit TransportError(std::string m) : Error(ErrorKind::transport, std::move(m)) {}
};

// Non-fatal diagnostics collected by operations that warn-and-continue.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
  if (sink != nullptr) sink->push_back(std::move(message));
}

}  // namespace varfuse
