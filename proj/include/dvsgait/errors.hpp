#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dvsgait {

enum class ErrorKind {
  invalid_argument,
  invalid_stream,
  format_error,
  data_error,
  config_error,
  numeric_error,
  state_error,
  degenerate_batch,
  degenerate_embedding,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::invalid_stream: return "invalid-stream";
    case ErrorKind::format_error: return "format-error";
    case ErrorKind::data_error: return "data-error";
    case ErrorKind::config_error: return "config-error";
    case ErrorKind::numeric_error: return "numeric-error";
    case ErrorKind::state_error: return "state-error";
    case ErrorKind::degenerate_batch: return "degenerate-batch";
    case ErrorKind::degenerate_embedding: return "degenerate-embedding";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + ": " + msg), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// File parse failure carrying the byte offset of the offending data.
class FormatError : public Error {
 public:
  FormatError(const std::string& msg, std::uint64_t byte_offset)
      : Error(ErrorKind::format_error, msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::uint64_t byte_offset() const { return byte_offset_; }

 private:
  std::uint64_t byte_offset_;
};

}  // namespace dvsgait
