// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vmclass {

enum class ErrorCode {
  Usage,
  Io,
  Schema,
  Row,
  Data,
  Shape,
  State,
};

std::string_view error_code_name(ErrorCode code);

/// Base exception for every failure raised by the library. The code is what
/// the CLI prints on its machine-readable error line.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message)
    : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace vmclass
