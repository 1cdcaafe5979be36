#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace kesic {

// Every failure any component can report. Names are surfaced verbatim in
// reports, HTTP bodies and CLI output, so keep to_string() stable.
enum class Errc {
  // codecs
  LengthMismatch,
  FieldFormatError,
  Overflow,
  FieldWidthError,
  // crypto
  AuthFailure,
  EmptyPassword,
  EmptyMemory,
  KeyRoleMismatch,
  // kerberos
  UnknownPrincipal,
  TicketExpired,
  IdMismatch,
  SkewExceeded,
  NotAuthorized,
  ReplayDetected,
  // isv
  UnknownDevice,
  CounterOutOfRange,
  AttestationMismatch,
  KerberosAuthFailure,
  DeviceAsleep,
  DeviceUnhealthy,
  TicketBudgetExhausted,
  // device
  NotSynced,
  DeviceRejected,
  // transport / runtime
  Timeout,
  TransportError,
  PortInUse,
  StartupTimeout,
  IoError,
  ParseError,
  InvalidArgument,
  // harness
  ScriptError,
  ExpectationFailed,
};

std::string_view to_string(Errc code);
// Inverse of to_string; InvalidArgument for unknown names.
Errc errc_from_string(std::string_view name);

struct Error {
  Errc code;
  std::string detail;

  std::string message() const;
};

inline Error make_error(Errc code, std::string detail = {}) {
  return Error{code, std::move(detail)};
}

// Minimal value-or-error carrier. std::expected is C++23; this keeps the
// same shape so call sites read the same way.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::in_place_index<0>, std::move(value)) {}
  Result(Error error) : v_(std::in_place_index<1>, std::move(error)) {}

  bool ok() const { return v_.index() == 0; }
  explicit operator bool() const { return ok(); }

  T& value() & { return std::get<0>(v_); }
  const T& value() const& { return std::get<0>(v_); }
  T&& value() && { return std::get<0>(std::move(v_)); }

  const Error& error() const { return std::get<1>(v_); }
  Errc code() const { return error().code; }

  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }
  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }

 private:
  std::variant<T, Error> v_;
};

struct Ok {};
using Status = Result<Ok>;

inline Status ok_status() { return Ok{}; }

}  // namespace kesic

// Propagates the error of a Result-returning expression.
#define KESIC_TRY(var, expr)                   \
  auto var##_result_ = (expr);                 \
  if (!var##_result_) return var##_result_.error(); \
  auto var = std::move(var##_result_).value()

#define KESIC_CHECK(expr)                      \
  do {                                         \
    auto kesic_status_ = (expr);               \
    if (!kesic_status_) return kesic_status_.error(); \
  } while (0)
