#include "kesic/kdc/kdc.hpp"

#include <algorithm>

namespace kesic::kdc {

using crypto::KeyRole;

PrincipalDb::PrincipalDb(const PrincipalDb& o) : tgs_id_(o.tgs_id_), tgs_key_(o.tgs_key_) {
  std::shared_lock lock(o.mu_);
  clients_ = o.clients_;
  services_ = o.services_;
}

Result<PrincipalDb> PrincipalDb::from_json(const Json& j) {
  try {
    const auto& tgs = j.at("tgs");
    KESIC_TRY(tgs_key, SymmetricKey::from_hex(tgs.at("key").get<std::string>(), KeyRole::service));
    PrincipalDb db(tgs_key, tgs.value("id", std::string(krb::kDefaultTgsId)));
    for (const auto& c : j.value("clients", Json::array())) {
      auto name = c.at("name").get<std::string>();
      std::set<std::string> allowed;
      for (const auto& s : c.value("allowed_services", Json::array())) {
        allowed.insert(s.get<std::string>());
      }
      if (c.contains("key")) {
        KESIC_TRY(key, SymmetricKey::from_hex(c.at("key").get<std::string>(),
                                              KeyRole::password_derived));
        db.add_client_key(name, key, std::move(allowed));
      } else {
        KESIC_CHECK(db.add_client(name, c.at("password").get<std::string>(), std::move(allowed)));
      }
    }
    for (const auto& s : j.value("services", Json::array())) {
      KESIC_TRY(key, SymmetricKey::from_hex(s.at("key").get<std::string>(), KeyRole::service));
      db.add_service(s.at("id").get<std::string>(), key);
    }
    return db;
  } catch (const Json::exception& e) {
    return make_error(Errc::ParseError, std::string("principal db: ") + e.what());
  }
}

Result<PrincipalDb> PrincipalDb::load(const std::filesystem::path& path) {
  KESIC_TRY(j, read_json_file(path));
  return from_json(j);
}

Json PrincipalDb::to_json() const {
  std::shared_lock lock(mu_);
  Json clients = Json::array();
  for (const auto& [name, c] : clients_) {
    clients.push_back({{"name", name},
                       {"key", c.key.hex()},
                       {"allowed_services", Json(c.allowed_services)}});
  }
  Json services = Json::array();
  for (const auto& [id, key] : services_) services.push_back({{"id", id}, {"key", key.hex()}});
  return Json{{"tgs", {{"id", tgs_id_}, {"key", tgs_key_.hex()}}},
              {"clients", clients},
              {"services", services}};
}

Status PrincipalDb::add_client(const std::string& name, std::string_view password,
                               std::set<std::string> allowed_services) {
  KESIC_TRY(key, crypto::derive_password_key(password, as_bytes(name)));
  add_client_key(name, key, std::move(allowed_services));
  return ok_status();
}

void PrincipalDb::add_client_key(const std::string& name, SymmetricKey key,
                                 std::set<std::string> allowed_services) {
  std::unique_lock lock(mu_);
  clients_.insert_or_assign(name, ClientPrincipal{name, std::move(key), std::move(allowed_services)});
}

void PrincipalDb::add_service(const std::string& id, SymmetricKey key) {
  std::unique_lock lock(mu_);
  services_.insert_or_assign(id, std::move(key));
}

std::optional<ClientPrincipal> PrincipalDb::find_client(std::string_view name) const {
  std::shared_lock lock(mu_);
  auto it = clients_.find(name);
  if (it == clients_.end()) return std::nullopt;
  return it->second;
}

std::optional<SymmetricKey> PrincipalDb::find_service(std::string_view id) const {
  std::shared_lock lock(mu_);
  auto it = services_.find(id);
  if (it == services_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------- exchanges

namespace {

Result<std::string> str(const Json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_string()) {
    return make_error(Errc::ParseError, std::string("missing string ") + name);
  }
  return it->get<std::string>();
}

Result<Timestamp> num(const Json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_number_integer()) {
    return make_error(Errc::ParseError, std::string("missing integer ") + name);
  }
  return it->get<Timestamp>();
}

}  // namespace

SymmetricKey Kdc::fresh_session_key() {
  std::lock_guard lock(rng_mu_);
  return SymmetricKey::generate(rng_, KeyRole::session);
}

KdcReply Kdc::handle(std::string_view request) {
  auto j = parse_json(request);
  Result<Json> reply = j ? Result<Json>(make_error(Errc::ParseError, "missing type"))
                         : Result<Json>(j.error());
  if (j) {
    auto type = j->value("type", "");
    if (type == "AS_REQ") {
      reply = as_exchange(*j);
    } else if (type == "TGS_REQ") {
      reply = tgs_exchange(*j);
    } else if (!type.empty()) {
      reply = make_error(Errc::ParseError, "unknown message type " + type);
    }
  }
  if (!reply) return KdcReply{krb::error_reply(reply.error()).dump(), reply.error()};
  return KdcReply{reply->dump(), ok_status()};
}

Result<Json> Kdc::as_exchange(const Json& request) {
  KESIC_TRY(id_c, str(request, "id_c"));
  KESIC_TRY(id_tgs, str(request, "id_tgs"));
  KESIC_TRY(ad_text, str(request, "ad_c"));
  KESIC_TRY(ts, num(request, "ts"));
  KESIC_TRY(ad_c, wire::Address::parse(ad_text));

  auto client = db_.find_client(id_c);
  if (!client) return make_error(Errc::UnknownPrincipal, "no client " + id_c);
  if (id_tgs != db_.tgs_id()) return make_error(Errc::UnknownPrincipal, "no TGS " + id_tgs);

  Timestamp now = clock_.now();
  Timestamp lf2 = now + config_.tgt_lifetime;
  auto k_c_tgs = fresh_session_key();

  std::lock_guard lock(rng_mu_);
  Json tgt{{"k_c_tgs", k_c_tgs.hex()}, {"id_c", id_c},  {"ad_c", ad_c.render()},
           {"id_tgs", id_tgs},         {"lf2", lf2},     {"ts", now}};
  Json body{{"k_c_tgs", k_c_tgs.hex()},
            {"id_tgs", id_tgs},
            {"ts", ts},
            {"lf2", lf2},
            {"tgt", krb::seal_json(db_.tgs_key(), tgt, rng_)}};
  return Json{{"type", "AS_REP"}, {"id_c", id_c}, {"enc", krb::seal_json(client->key, body, rng_)}};
}

Result<Json> Kdc::tgs_exchange(const Json& request) {
  KESIC_TRY(id_v, str(request, "id_v"));
  KESIC_TRY(tgt_b64, str(request, "tgt"));
  KESIC_TRY(auth_b64, str(request, "authenticator"));

  Timestamp now = clock_.now();
  KESIC_TRY(tgt, krb::open_json(db_.tgs_key(), tgt_b64));
  KESIC_TRY(id_tgs, str(tgt, "id_tgs"));
  KESIC_TRY(id_c, str(tgt, "id_c"));
  KESIC_TRY(ad_text, str(tgt, "ad_c"));
  KESIC_TRY(lf2, num(tgt, "lf2"));
  KESIC_TRY(k_hex, str(tgt, "k_c_tgs"));
  KESIC_TRY(ad_c, wire::Address::parse(ad_text));
  KESIC_TRY(k_c_tgs, SymmetricKey::from_hex(k_hex, KeyRole::session));
  if (id_tgs != db_.tgs_id()) return make_error(Errc::IdMismatch, "TGT issued for " + id_tgs);
  if (lf2 <= now) return make_error(Errc::TicketExpired, "TGT expired");

  KESIC_TRY(auth, krb::verify_authenticator(k_c_tgs, auth_b64, id_c, ad_c, now,
                                            config_.clock_skew, replay_));

  auto service_key = db_.find_service(id_v);
  if (!service_key) return make_error(Errc::UnknownPrincipal, "no service " + id_v);
  auto client = db_.find_client(id_c);
  if (!client || !client->allowed_services.count(id_v)) {
    return make_error(Errc::NotAuthorized, id_c + " may not use " + id_v);
  }

  Timestamp lf4 = std::min(now + config_.ticket_lifetime, lf2);
  auto k_c_v = fresh_session_key();

  std::lock_guard lock(rng_mu_);
  Json ticket{{"k_c_v", k_c_v.hex()}, {"id_c", id_c}, {"ad_c", ad_c.render()},
              {"id_v", id_v},         {"ts", now},    {"lf4", lf4}};
  Json body{{"k_c_v", k_c_v.hex()},
            {"id_v", id_v},
            {"ts", auth.ts},
            {"lf4", lf4},
            {"ticket", krb::seal_json(*service_key, ticket, rng_)}};
  return Json{{"type", "TGS_REP"}, {"enc", krb::seal_json(k_c_tgs, body, rng_)}};
}

}  // namespace kesic::kdc
