#include "kesic/wire/fields.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <limits>

namespace kesic::wire {

Wide pow10(unsigned exponent) {
  Wide v = 1;
  for (unsigned i = 0; i < exponent; ++i) v *= 10;
  return v;
}

Result<std::string> render_decimal(Wide value, std::size_t width) {
  // 10^38 is the largest power of ten below 2^128.
  if (width < 39 && value >= pow10(static_cast<unsigned>(width))) {
    return make_error(Errc::Overflow, "value does not fit in " + std::to_string(width) +
                                          " decimal digits");
  }
  std::string out(width, '0');
  for (std::size_t i = width; i-- > 0 && value != 0;) {
    out[i] = static_cast<char>('0' + static_cast<int>(value % 10));
    value /= 10;
  }
  return out;
}

Result<Wide> parse_decimal(std::string_view text, std::size_t width) {
  if (text.size() != width) return make_error(Errc::LengthMismatch, "decimal field width");
  Wide v = 0;
  for (char c : text) {
    if (c < '0' || c > '9') return make_error(Errc::FieldFormatError, "non-decimal character");
    v = v * 10 + static_cast<unsigned>(c - '0');
  }
  return v;
}

Result<std::string> canonical_render(const FieldSpec& spec, Wide value) {
  if (is_decimal_kind(spec.kind)) return render_decimal(value, spec.width);
  if (spec.kind == FieldKind::address) {
    if (value > std::numeric_limits<std::uint32_t>::max()) {
      return make_error(Errc::Overflow, "address exceeds 32 bits");
    }
    return Address(static_cast<std::uint32_t>(value)).render();
  }
  return make_error(Errc::InvalidArgument,
                    std::string(spec.name) + " is not a numeric field kind");
}

Result<Wide> canonical_parse(const FieldSpec& spec, std::string_view text) {
  if (!is_canonical(spec, text)) {
    return make_error(Errc::FieldFormatError, std::string(spec.name) + " malformed");
  }
  if (is_decimal_kind(spec.kind)) return parse_decimal(text, spec.width);
  if (spec.kind == FieldKind::address) {
    KESIC_TRY(a, Address::parse(text));
    return Wide{a.value()};
  }
  return make_error(Errc::InvalidArgument,
                    std::string(spec.name) + " is not a numeric field kind");
}

// ---------------------------------------------------------------- NumericId

Result<NumericId> NumericId::make(std::uint64_t value) {
  if (value >= 100000000ULL) return make_error(Errc::Overflow, "numeric id exceeds 8 digits");
  return NumericId(static_cast<std::uint32_t>(value));
}

Result<NumericId> NumericId::parse(std::string_view text) {
  KESIC_TRY(v, canonical_parse(fields::id_c, text));
  return NumericId(static_cast<std::uint32_t>(v));
}

std::string NumericId::render() const { return render_decimal(value_, 8).value(); }

// ---------------------------------------------------------------- Address

Result<Address> Address::parse(std::string_view hex8) {
  if (!is_canonical(fields::ad_c, hex8)) {
    return make_error(Errc::FieldFormatError, "address must be 8 lowercase hex digits");
  }
  std::uint32_t v = 0;
  for (char c : hex8) {
    v = (v << 4) | static_cast<std::uint32_t>(c <= '9' ? c - '0' : c - 'a' + 10);
  }
  return Address(v);
}

Result<Address> Address::from_ipv4(std::string_view dotted) {
  in_addr a{};
  std::string s(dotted);
  if (::inet_pton(AF_INET, s.c_str(), &a) != 1) {
    return make_error(Errc::InvalidArgument, "not an IPv4 address: " + s);
  }
  return Address(ntohl(a.s_addr));
}

std::string Address::render() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(8, '0');
  for (int i = 0; i < 8; ++i) out[7 - i] = kDigits[(value_ >> (4 * i)) & 0xf];
  return out;
}

std::string Address::dotted() const {
  return std::to_string(value_ >> 24) + "." + std::to_string((value_ >> 16) & 0xff) + "." +
         std::to_string((value_ >> 8) & 0xff) + "." + std::to_string(value_ & 0xff);
}

// ---------------------------------------------------------------- Challenge

Challenge Challenge::generate(RandomSource& rng) { return Challenge(to_hex(rng.bytes(16))); }

Result<Challenge> Challenge::parse(std::string_view text) {
  if (!is_canonical(fields::challenge, text)) {
    return make_error(Errc::FieldFormatError, "challenge must be 32 lowercase hex digits");
  }
  return Challenge(std::string(text));
}

// ---------------------------------------------------------------- Command

std::string_view command_token(Command cmd) {
  switch (cmd) {
    case Command::led_on: return "LED_ON  ";
    case Command::led_off: return "LED_OFF ";
    case Command::attest: return "ATTEST  ";
  }
  return "        ";
}

std::string_view command_name(Command cmd) {
  auto t = command_token(cmd);
  return t.substr(0, t.find(' '));
}

Result<Command> parse_command(std::string_view text) {
  auto end = text.find_last_not_of(' ');
  auto trimmed = end == std::string_view::npos ? std::string_view{} : text.substr(0, end + 1);
  for (auto c : {Command::led_on, Command::led_off, Command::attest}) {
    if (trimmed == command_name(c)) return c;
  }
  return make_error(Errc::FieldFormatError, "unknown command '" + std::string(trimmed) + "'");
}

std::string_view to_string(DeviceType t) {
  return t == DeviceType::general ? "general" : "power-constrained";
}

Result<DeviceType> parse_device_type(std::string_view s) {
  if (s == "general") return DeviceType::general;
  if (s == "power-constrained") return DeviceType::power_constrained;
  return make_error(Errc::ParseError, "unknown device type " + std::string(s));
}

// ---------------------------------------------------------------- typed helpers

Result<std::string> render_timestamp(const FieldSpec& spec, std::int64_t t) {
  if (t < 0) return make_error(Errc::Overflow, "negative timestamp");
  return render_decimal(static_cast<Wide>(t), spec.width);
}

Result<std::int64_t> parse_timestamp(const FieldSpec& spec, std::string_view text) {
  KESIC_TRY(v, canonical_parse(spec, text));
  if (v > static_cast<Wide>(std::numeric_limits<std::int64_t>::max())) {
    return make_error(Errc::Overflow, std::string(spec.name) + " exceeds 64 bits");
  }
  return static_cast<std::int64_t>(v);
}

Result<std::string> render_counter(const FieldSpec& spec, std::uint64_t c) {
  return render_decimal(c, spec.width);
}

Result<std::uint64_t> parse_counter(const FieldSpec& spec, std::string_view text) {
  KESIC_TRY(v, canonical_parse(spec, text));
  if (v > std::numeric_limits<std::uint64_t>::max()) {
    return make_error(Errc::Overflow, std::string(spec.name) + " exceeds 64 bits");
  }
  return static_cast<std::uint64_t>(v);
}

}  // namespace kesic::wire
