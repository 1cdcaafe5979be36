#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>

#include "kesic/common/clock.hpp"
#include "kesic/common/json_io.hpp"
#include "kesic/common/random.hpp"
#include "kesic/crypto/crypto.hpp"
#include "kesic/kdc/kerberos.hpp"

namespace kesic::kdc {

using crypto::SymmetricKey;

struct ClientPrincipal {
  std::string name;
  SymmetricKey key;  // password-derived
  std::set<std::string> allowed_services;
};

// Principal database: client keys, service keys and the TGS key.
//
// JSON form:
//   {"tgs": {"id": "krbtgt", "key": "<hex>"},
//    "clients": [{"name": "alice", "key": "<hex>", "allowed_services": ["isv"]}],
//    "services": [{"id": "isv", "key": "<hex>"}]}
class PrincipalDb {
 public:
  explicit PrincipalDb(SymmetricKey tgs_key, std::string tgs_id = std::string(krb::kDefaultTgsId))
      : tgs_id_(std::move(tgs_id)), tgs_key_(std::move(tgs_key)) {}

  static Result<PrincipalDb> from_json(const Json& j);
  static Result<PrincipalDb> load(const std::filesystem::path& path);
  Json to_json() const;

  // Derives the client key from the password with the principal name as salt.
  Status add_client(const std::string& name, std::string_view password,
                    std::set<std::string> allowed_services);
  void add_client_key(const std::string& name, SymmetricKey key,
                      std::set<std::string> allowed_services);
  void add_service(const std::string& id, SymmetricKey key);

  std::optional<ClientPrincipal> find_client(std::string_view name) const;
  std::optional<SymmetricKey> find_service(std::string_view id) const;
  const std::string& tgs_id() const { return tgs_id_; }
  const SymmetricKey& tgs_key() const { return tgs_key_; }

 private:
  std::string tgs_id_;
  SymmetricKey tgs_key_;
  mutable std::shared_mutex mu_;
  std::map<std::string, ClientPrincipal, std::less<>> clients_;
  std::map<std::string, SymmetricKey, std::less<>> services_;

 public:
  PrincipalDb(const PrincipalDb& o);
  PrincipalDb& operator=(const PrincipalDb&) = delete;
};

struct KdcConfig {
  Seconds tgt_lifetime = 10 * 3600;
  Seconds ticket_lifetime = 3600;
  Seconds clock_skew = 300;
};

struct KdcReply {
  std::string body;  // AS_REP, TGS_REP or KRB_ERROR JSON
  Status status;     // the verdict behind the body
};

class Kdc {
 public:
  Kdc(PrincipalDb db, KdcConfig config, const Clock& clock, RandomSource& rng)
      : db_(std::move(db)), config_(config), clock_(clock), rng_(rng),
        replay_(config.clock_skew) {}

  // Dispatches on the "type" property (AS_REQ / TGS_REQ).
  KdcReply handle(std::string_view request);

  Result<Json> as_exchange(const Json& request);
  Result<Json> tgs_exchange(const Json& request);

  const PrincipalDb& db() const { return db_; }

 private:
  SymmetricKey fresh_session_key();

  PrincipalDb db_;
  KdcConfig config_;
  const Clock& clock_;
  RandomSource& rng_;
  std::mutex rng_mu_;
  krb::ReplayCache replay_;
};

}  // namespace kesic::kdc
