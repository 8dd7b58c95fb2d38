#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace crowdguard {

enum class ErrorCode {
  io,
  parse,
  duplicate_id,
  missing_field,
  dangling_reference,
  unknown_evaluator,
  empty_domain,
  missing_feature,
  type_mismatch,
  empty_candidates,
  unknown_predicate,
  domain_violation,
  length_limit,
  too_many_literals,
  special_rule,
  illegal_action,
  terminal_state,
  incomplete_rule,
  limit_exceeded,
  exhausted_pool,
  condition_mismatch,
  empty_input,
  not_found,
  config,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library. `code()` is the stable part; the
// message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  // 1-based line number for errors raised while reading line-delimited files.
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
};

}  // namespace crowdguard
