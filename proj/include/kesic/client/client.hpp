#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "kesic/common/clock.hpp"
#include "kesic/common/json_io.hpp"
#include "kesic/common/random.hpp"
#include "kesic/device/rot.hpp"
#include "kesic/kdc/kerberos.hpp"
#include "kesic/wire/frames.hpp"

namespace kesic::client {

using crypto::SymmetricKey;

// ---------------------------------------------------------------- transports

class KdcLink {
 public:
  virtual ~KdcLink() = default;
  virtual Result<std::string> exchange(std::string_view request) = 0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

class IsvLink {
 public:
  virtual ~IsvLink() = default;
  virtual Result<HttpResponse> post_ticket(std::string_view authorization,
                                           std::string_view body) = 0;
};

class DeviceLink {
 public:
  virtual ~DeviceLink() = default;
  // One request datagram, one reply. Timeout when nothing comes back.
  virtual Result<std::string> send(const std::string& device, std::string_view frame) = 0;
};

// ---------------------------------------------------------------- config

// JSON form:
//   {"name": "alice", "id": "00000101", "address": "10.0.0.2", "isv_service": "isv",
//    "kdc": "127.0.0.1:7500", "isv_url": "http://127.0.0.1:7600",
//    "devices": {"lamp": "127.0.0.1:7701"}}
struct ClientConfig {
  std::string name;
  wire::NumericId id_c;
  wire::Address ad_c;
  std::string isv_service = "isv";
  std::string tgs_id = std::string(krb::kDefaultTgsId);
  std::string kdc_addr;
  std::string isv_url;
  std::map<std::string, std::string> device_addrs;
  int device_retries = 2;

  static Result<ClientConfig> from_json(const Json& j);
  static Result<ClientConfig> load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------- cache

struct DeviceEntry {
  wire::NumericId device_id;
  wire::DeviceType type = wire::DeviceType::general;
  std::string nonce;  // canonical lifetime (Dev_g) or co_pc (Dev_pc)
  SymmetricKey session_key;
  crypto::HmacTag ticket;
  Timestamp issued = 0;
  Timestamp last_ts = 0;  // last TS sent to a Dev_g

  Timestamp lifetime() const;  // Dev_g only
  std::uint64_t co_pc() const;  // Dev_pc only
};

// Credential cache. Persisted as JSON with owner-only permissions when a
// path is set.
class CredentialCache {
 public:
  CredentialCache() = default;
  static Result<CredentialCache> open(const std::filesystem::path& path);

  Status save() const;
  Json to_json() const;
  static Result<CredentialCache> from_json(const Json& j);

  // Drops Kerberos credentials past their lifetime. Device entries stay so
  // the caller can decide about expired Dev_g tickets.
  void purge(Timestamp now);
  void clear();

  std::string principal;
  std::optional<krb::TgtCredential> tgt;
  std::map<std::string, krb::ServiceCredential> services;
  std::map<std::string, DeviceEntry> devices;
  std::uint32_t cusec = 0;

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------- SDK

struct DeviceReply {
  device::Outcome outcome = device::Outcome::invalid_request;
  std::string text;  // opened response (e.g. "OK LED_ON")
};

struct AttestVerdict {
  bool healthy = false;
  std::string report;
};

class Client {
 public:
  Client(ClientConfig config, CredentialCache& cache, const Clock& clock, RandomSource& rng,
         KdcLink& kdc, IsvLink& isv, DeviceLink& devices)
      : config_(std::move(config)), cache_(cache), clock_(clock), rng_(rng), kdc_(kdc),
        isv_(isv), devices_(devices) {}

  // AS exchange. AuthFailure on a wrong password; nothing is cached then.
  Status login(std::string_view password);
  // TGS exchange for the ISV, reusing a cached service ticket when valid.
  Result<krb::ServiceCredential> isv_credential();
  // POST /ticket and cache the grant.
  Result<DeviceEntry> get_iot_ticket(const std::string& device);
  // Sends cmd with the cached entry. Expired Dev_g entries are refused
  // locally (TicketExpired) unless `force`. Dev_pc entries are dropped once
  // the device has answered.
  Result<DeviceReply> call_device(const std::string& device, wire::Command cmd, bool force = false);
  // Presents an entry as-is; the building block of call_device.
  Result<DeviceReply> present(const std::string& device, DeviceEntry& entry, wire::Command cmd);
  // ATTEST on a Dev_g and compare against HMAC(session key, SHA-256(image)).
  // A non-accept device answer is returned as an error carrying the outcome.
  Result<AttestVerdict> verify_attestation(const std::string& device, ByteView expected_image,
                                           bool force = false);

  const ClientConfig& config() const { return config_; }

 private:
  krb::Authenticator next_authenticator();
  Status save();

  ClientConfig config_;
  CredentialCache& cache_;
  const Clock& clock_;
  RandomSource& rng_;
  KdcLink& kdc_;
  IsvLink& isv_;
  DeviceLink& devices_;
};

// Opens a device response: plaintext, or "SEALED <b64>" under the session key.
Result<DeviceReply> parse_device_reply(std::string_view raw, const SymmetricKey& session);

// CLI exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitAuth = 2;
inline constexpr int kExitPolicy = 3;
inline constexpr int kExitDevice = 4;
inline constexpr int kExitTransport = 5;
inline constexpr int kExitCompromised = 6;

int exit_code_for(Errc code);

}  // namespace kesic::client
