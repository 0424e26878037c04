#pragma once

#include <stdexcept>
#include <string>

namespace cxhg {

enum class ErrorCode {
  shape,    // tensor geometry violates an operation's contract
  value,    // argument outside its documented domain
  format,   // malformed file payload
  config,   // invalid configuration key or value
  io,       // filesystem failure
  numeric,  // non-finite values encountered
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class FormatIssue {
  bad_magic,
  bad_version,
  truncated,
  shape_mismatch,
  bad_value,
};

/// Rejection raised by the binary container readers. The issue distinguishes
/// the failure classes so callers can report them separately.
class FormatError : public Error {
 public:
  FormatError(FormatIssue issue, const std::string& what)
      : Error(ErrorCode::format, what), issue_(issue) {}

  FormatIssue issue() const noexcept { return issue_; }

 private:
  FormatIssue issue_;
};

const char* to_string(FormatIssue issue) noexcept;

}  // namespace cxhg
