#pragma once

// Minimal JSON-framed Kerberos: the AS, TGS and AP exchanges, with every
// ticket, authenticator and reply sealed under the key the protocol names.

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <tuple>

#include "kesic/common/clock.hpp"
#include "kesic/common/json_io.hpp"
#include "kesic/common/random.hpp"
#include "kesic/crypto/crypto.hpp"
#include "kesic/wire/fields.hpp"

namespace kesic::krb {

using crypto::SymmetricKey;

inline constexpr std::string_view kDefaultTgsId = "krbtgt";

// Sealed JSON helpers: base64(nonce || ciphertext || tag).
std::string seal_json(const SymmetricKey& key, const Json& payload, RandomSource& rng);
Result<Json> open_json(const SymmetricKey& key, std::string_view sealed_b64);

// Authenticator plaintext. `cusec` is the sub-second discriminator Kerberos
// carries next to ctime; the replay cache keys on (id_c, ts, cusec).
struct Authenticator {
  std::string id_c;
  wire::Address ad_c;
  Timestamp ts = 0;
  std::uint32_t cusec = 0;
};

std::string seal_authenticator(const SymmetricKey& session_key, const Authenticator& a,
                               RandomSource& rng);

// Remembers authenticators for the skew window and refuses repeats.
class ReplayCache {
 public:
  explicit ReplayCache(Seconds window) : window_(window) {}

  // True if unseen (and records it); false on replay.
  bool check_and_insert(const Authenticator& a, Timestamp now);
  std::size_t size() const;

 private:
  Seconds window_;
  mutable std::mutex mu_;
  std::map<std::tuple<std::string, Timestamp, std::uint32_t>, Timestamp> seen_;
};

// Opens and checks an authenticator against the identity bound in a ticket:
// AuthFailure, IdMismatch, SkewExceeded or ReplayDetected.
Result<Authenticator> verify_authenticator(const SymmetricKey& session_key,
                                           std::string_view sealed_b64,
                                           std::string_view expected_id_c,
                                           const wire::Address& expected_ad_c, Timestamp now,
                                           Seconds skew, ReplayCache& cache);

// ---------------------------------------------------------------- client side

struct TgtCredential {
  std::string tgt;  // sealed, opaque to the client
  SymmetricKey session_key;
  Timestamp lf2 = 0;
};

struct ServiceCredential {
  std::string id_v;
  std::string ticket;  // sealed, opaque to the client
  SymmetricKey session_key;
  Timestamp lf4 = 0;
};

std::string build_as_request(std::string_view id_c, std::string_view id_tgs,
                             const wire::Address& ad_c, Timestamp ts);
// AuthFailure when the reply does not open under the password key, i.e. the
// password was wrong. KRB_ERROR replies surface their code.
Result<TgtCredential> open_as_reply(const SymmetricKey& password_key, std::string_view reply);

std::string build_tgs_request(const TgtCredential& tgt, std::string_view id_v,
                              const Authenticator& auth, RandomSource& rng);
Result<ServiceCredential> open_tgs_reply(const TgtCredential& tgt, std::string_view reply);

// AP token: base64 of {"ticket","authenticator"} for an Authorization header.
std::string build_ap_token(const ServiceCredential& cred, const Authenticator& auth,
                           RandomSource& rng);

// ---------------------------------------------------------------- service side

struct ApContext {
  std::string id_c;
  wire::Address ad_c;
  SymmetricKey session_key;
  Timestamp ticket_expiry = 0;
};

// Server half of the AP exchange for one Kerberized service.
class ApVerifier {
 public:
  ApVerifier(std::string service_id, SymmetricKey service_key, Seconds skew)
      : service_id_(std::move(service_id)),
        service_key_(std::move(service_key)),
        skew_(skew),
        cache_(skew) {}

  Result<ApContext> verify(std::string_view token, Timestamp now);

 private:
  std::string service_id_;
  SymmetricKey service_key_;
  Seconds skew_;
  ReplayCache cache_;
};

// Error reply shared by KDC paths.
Json error_reply(const Error& e);
// Maps a KRB_ERROR body back to its Error; nullopt when `reply` is not one.
std::optional<Error> as_error_reply(const Json& reply);

}  // namespace kesic::krb
