#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "kesic/common/random.hpp"
#include "kesic/common/result.hpp"
#include "kesic/wire/field_spec.hpp"

namespace kesic::wire {

// Wide enough to hold values that overflow any of our decimal widths, so
// the overflow path is reachable from ordinary callers.
using Wide = unsigned __int128;

Wide pow10(unsigned exponent);

Result<std::string> render_decimal(Wide value, std::size_t width);
Result<Wide> parse_decimal(std::string_view text, std::size_t width);

// Zero-padded, width-exact rendering of a decimal or address field.
Result<std::string> canonical_render(const FieldSpec& spec, Wide value);
Result<Wide> canonical_parse(const FieldSpec& spec, std::string_view text);

// Numeric principal/device identifier, 8 decimal digits on the wire.
class NumericId {
 public:
  NumericId() = default;
  static Result<NumericId> make(std::uint64_t value);
  static Result<NumericId> parse(std::string_view text);

  std::uint32_t value() const { return value_; }
  std::string render() const;

  auto operator<=>(const NumericId&) const = default;

 private:
  explicit NumericId(std::uint32_t v) : value_(v) {}
  std::uint32_t value_ = 0;
};

// Client network address (AD_c), an IPv4 address as 8 lowercase hex digits.
class Address {
 public:
  Address() = default;
  explicit Address(std::uint32_t v) : value_(v) {}
  static Result<Address> parse(std::string_view hex8);
  static Result<Address> from_ipv4(std::string_view dotted);

  std::uint32_t value() const { return value_; }
  std::string render() const;
  std::string dotted() const;

  auto operator<=>(const Address&) const = default;

 private:
  std::uint32_t value_ = 0;
};

// Attestation challenge: 16 random bytes as 32 lowercase hex digits.
class Challenge {
 public:
  Challenge() : text_(32, '0') {}
  static Challenge generate(RandomSource& rng);
  static Result<Challenge> parse(std::string_view text);
  const std::string& text() const { return text_; }
  bool operator==(const Challenge&) const = default;

 private:
  explicit Challenge(std::string t) : text_(std::move(t)) {}
  std::string text_;
};

enum class DeviceType { general, power_constrained };

// "general" / "power-constrained"
std::string_view to_string(DeviceType t);
Result<DeviceType> parse_device_type(std::string_view s);

enum class Command { led_on, led_off, attest };

// 8-char padded wire token, e.g. "LED_ON  ".
std::string_view command_token(Command cmd);
// Accepts the padded token or its trimmed form.
Result<Command> parse_command(std::string_view text);
std::string_view command_name(Command cmd);

Result<std::string> render_timestamp(const FieldSpec& spec, std::int64_t t);
Result<std::int64_t> parse_timestamp(const FieldSpec& spec, std::string_view text);
Result<std::string> render_counter(const FieldSpec& spec, std::uint64_t c);
Result<std::uint64_t> parse_counter(const FieldSpec& spec, std::string_view text);

}  // namespace kesic::wire
