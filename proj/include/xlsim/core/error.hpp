#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace xlsim {

/// Coarse failure class; the CLI maps each one onto an exit code.
enum class ErrorKind {
  usage,     // exit 1
  data,      // exit 2
  external,  // exit 3
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// A malformed input row. `row` is 1-based and counts physical lines.
class ParseError : public DataError {
 public:
  ParseError(std::size_t row, const std::string& what)
      : DataError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ExternalError : public Error {
 public:
  explicit ExternalError(const std::string& what) : Error(ErrorKind::external, what) {}
};

/// A fixture-only resource had no entry for the requested key.
class FixtureMiss : public ExternalError {
 public:
  FixtureMiss(std::string resource, std::string key)
      : ExternalError("fixture-miss: " + resource + " has no entry for " + key),
        resource_(std::move(resource)),
        key_(std::move(key)) {}
  const std::string& resource() const noexcept { return resource_; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::string resource_;
  std::string key_;
};

/// Quota or rate-limit refusal from a live service, after retries ran out.
class RateLimited : public ExternalError {
 public:
  RateLimited(const std::string& what, long retry_after_ms, int attempts)
      : ExternalError(what + " (retry after " + std::to_string(retry_after_ms) + " ms, " +
                      std::to_string(attempts) + " attempts)"),
        retry_after_ms_(retry_after_ms),
        attempts_(attempts) {}
  long retry_after_ms() const noexcept { return retry_after_ms_; }
  int attempts() const noexcept { return attempts_; }

 private:
  long retry_after_ms_;
  int attempts_;
};

/// A peer answered, but the answer broke the wire contract.
class ProtocolViolation : public ExternalError {
 public:
  explicit ProtocolViolation(const std::string& what)
      : ExternalError("protocol violation: " + what) {}
};

inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::external: return 3;
  }
  return 2;
}

}  // namespace xlsim
