#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include <openssl/evp.h>
#include <openssl/rand.h>
#include <sys/stat.h>

#include "kesic/common/bytes.hpp"
#include "kesic/common/clock.hpp"
#include "kesic/common/json_io.hpp"
#include "kesic/common/random.hpp"
#include "kesic/common/result.hpp"

namespace kesic {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::FieldFormatError: return "FieldFormatError";
    case Errc::Overflow: return "Overflow";
    case Errc::FieldWidthError: return "FieldWidthError";
    case Errc::AuthFailure: return "AuthFailure";
    case Errc::EmptyPassword: return "EmptyPassword";
    case Errc::EmptyMemory: return "EmptyMemory";
    case Errc::KeyRoleMismatch: return "KeyRoleMismatch";
    case Errc::UnknownPrincipal: return "UnknownPrincipal";
    case Errc::TicketExpired: return "TicketExpired";
    case Errc::IdMismatch: return "IdMismatch";
    case Errc::SkewExceeded: return "SkewExceeded";
    case Errc::NotAuthorized: return "NotAuthorized";
    case Errc::ReplayDetected: return "ReplayDetected";
    case Errc::UnknownDevice: return "UnknownDevice";
    case Errc::CounterOutOfRange: return "CounterOutOfRange";
    case Errc::AttestationMismatch: return "AttestationMismatch";
    case Errc::KerberosAuthFailure: return "KerberosAuthFailure";
    case Errc::DeviceAsleep: return "DeviceAsleep";
    case Errc::DeviceUnhealthy: return "DeviceUnhealthy";
    case Errc::TicketBudgetExhausted: return "TicketBudgetExhausted";
    case Errc::NotSynced: return "NotSynced";
    case Errc::DeviceRejected: return "DeviceRejected";
    case Errc::Timeout: return "Timeout";
    case Errc::TransportError: return "TransportError";
    case Errc::PortInUse: return "PortInUse";
    case Errc::StartupTimeout: return "StartupTimeout";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ScriptError: return "ScriptError";
    case Errc::ExpectationFailed: return "ExpectationFailed";
  }
  return "Unknown";
}

Errc errc_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(Errc::ExpectationFailed); ++i) {
    auto code = static_cast<Errc>(i);
    if (to_string(code) == name) return code;
  }
  return Errc::InvalidArgument;
}

std::string Error::message() const {
  std::string out(to_string(code));
  if (!detail.empty()) {
    out += ": ";
    out += detail;
  }
  return out;
}

// ---------------------------------------------------------------- bytes

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Result<Bytes> from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) return make_error(Errc::FieldFormatError, "odd-length hex");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return make_error(Errc::FieldFormatError, "non-hex character");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

std::string base64_encode(ByteView bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                          static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Result<Bytes> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) return make_error(Errc::FieldFormatError, "base64 length");
  Bytes out(3 * text.size() / 4);
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) return make_error(Errc::FieldFormatError, "invalid base64");
  // EVP_DecodeBlock keeps the padding bytes as zeros.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

bool contains(ByteView haystack, ByteView needle) {
  if (needle.empty()) return true;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

// ---------------------------------------------------------------- clocks

Timestamp SystemClock::now() const {
  using namespace std::chrono;
  return duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
}

Timestamp FileClock::now() const {
  std::ifstream in(path_);
  Timestamp t = 0;
  in >> t;
  return t;
}

void FileClock::write(const std::filesystem::path& path, Timestamp t) {
  (void)write_file_atomic(path, std::to_string(t) + "\n");
}

std::unique_ptr<Clock> make_clock(const std::filesystem::path& virtual_clock_file) {
  if (virtual_clock_file.empty()) return std::make_unique<SystemClock>();
  return std::make_unique<FileClock>(virtual_clock_file);
}

// ---------------------------------------------------------------- random

void SystemRandom::fill(std::span<std::uint8_t> out) {
  if (out.empty()) return;
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw std::runtime_error("RAND_bytes failed");
  }
}

void SeededRandom::fill(std::span<std::uint8_t> out) {
  std::size_t i = 0;
  while (i < out.size()) {
    std::uint64_t word = engine_();
    for (int k = 0; k < 8 && i < out.size(); ++k, ++i) {
      out[i] = static_cast<std::uint8_t>(word >> (8 * k));
    }
  }
}

std::unique_ptr<RandomSource> make_random(std::optional<std::uint64_t> seed,
                                          std::string_view label) {
  if (!seed) return std::make_unique<SystemRandom>();
  // FNV-1a over the label keeps per-actor streams apart under one seed.
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : label) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return std::make_unique<SeededRandom>(*seed ^ h);
}

// ---------------------------------------------------------------- json / files

Result<Json> parse_json(std::string_view text) {
  auto j = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return make_error(Errc::ParseError, "malformed JSON");
  return j;
}

Result<Json> read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return make_error(Errc::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto j = parse_json(ss.str());
  if (!j) return make_error(Errc::ParseError, path.string() + ": malformed JSON");
  return j;
}

Status write_file_atomic(const std::filesystem::path& path, std::string_view contents,
                         bool owner_only) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return make_error(Errc::IoError, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) return make_error(Errc::IoError, "short write " + tmp.string());
  }
  if (owner_only) ::chmod(tmp.c_str(), 0600);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) return make_error(Errc::IoError, "rename " + path.string() + ": " + ec.message());
  return ok_status();
}

}  // namespace kesic
