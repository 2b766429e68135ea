#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pbshm {

enum class ErrorKind {
  invalid_input,
  not_found,
  record_shape,
  synchronisation,
  conflict,
  operator_contract,
  domain,
  connectivity,
  no_path,
  configuration,
  unsupported_model,
  model,
  sampling,
  alignment,
  compatibility,
  path,
  training,
  calibration,
  invalid_target,
  io,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. Every failure carries a kind so callers (and the
/// CLI exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace pbshm
