#include "kesic/kdc/kerberos.hpp"

#include <cstdlib>

namespace kesic::krb {

namespace {

template <typename T>
Result<T> field(const Json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) return make_error(Errc::ParseError, std::string("missing ") + name);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!it->is_string()) return make_error(Errc::ParseError, std::string(name) + " not a string");
  } else {
    if (!it->is_number_integer()) {
      return make_error(Errc::ParseError, std::string(name) + " not an integer");
    }
  }
  return it->get<T>();
}

Result<SymmetricKey> key_field(const Json& j, const char* name, crypto::KeyRole role) {
  KESIC_TRY(hex, field<std::string>(j, name));
  return SymmetricKey::from_hex(hex, role);
}

Result<wire::Address> address_field(const Json& j, const char* name) {
  KESIC_TRY(text, field<std::string>(j, name));
  return wire::Address::parse(text);
}

Result<Json> parse_reply(std::string_view reply, std::string_view expected_type) {
  KESIC_TRY(j, parse_json(reply));
  if (auto err = as_error_reply(j)) return *err;
  KESIC_TRY(type, field<std::string>(j, "type"));
  if (type != expected_type) {
    return make_error(Errc::ParseError, "expected " + std::string(expected_type));
  }
  return j;
}

}  // namespace

std::string seal_json(const SymmetricKey& key, const Json& payload, RandomSource& rng) {
  auto box = crypto::seal(key, as_bytes(payload.dump()), rng);
  return base64_encode(box.serialize());
}

Result<Json> open_json(const SymmetricKey& key, std::string_view sealed_b64) {
  auto raw = base64_decode(sealed_b64);
  if (!raw) return make_error(Errc::AuthFailure, "sealed field is not base64");
  KESIC_TRY(box, crypto::SealedBox::parse(*raw));
  KESIC_TRY(plain, crypto::open(key, box));
  auto j = parse_json(to_string(plain));
  if (!j) return make_error(Errc::AuthFailure, "sealed payload is not JSON");
  return j;
}

std::string seal_authenticator(const SymmetricKey& session_key, const Authenticator& a,
                               RandomSource& rng) {
  Json j{{"id_c", a.id_c}, {"ad_c", a.ad_c.render()}, {"ts", a.ts}, {"cusec", a.cusec}};
  return seal_json(session_key, j, rng);
}

bool ReplayCache::check_and_insert(const Authenticator& a, Timestamp now) {
  std::lock_guard lock(mu_);
  for (auto it = seen_.begin(); it != seen_.end();) {
    it = it->second < now ? seen_.erase(it) : std::next(it);
  }
  auto key = std::make_tuple(a.id_c, a.ts, a.cusec);
  // Entries live until their timestamp leaves the acceptance window.
  return seen_.emplace(key, a.ts + window_).second;
}

std::size_t ReplayCache::size() const {
  std::lock_guard lock(mu_);
  return seen_.size();
}

Result<Authenticator> verify_authenticator(const SymmetricKey& session_key,
                                           std::string_view sealed_b64,
                                           std::string_view expected_id_c,
                                           const wire::Address& expected_ad_c, Timestamp now,
                                           Seconds skew, ReplayCache& cache) {
  KESIC_TRY(j, open_json(session_key, sealed_b64));
  KESIC_TRY(id_c, field<std::string>(j, "id_c"));
  KESIC_TRY(ad_c, address_field(j, "ad_c"));
  KESIC_TRY(ts, field<Timestamp>(j, "ts"));
  KESIC_TRY(cusec, field<std::uint32_t>(j, "cusec"));
  if (id_c != expected_id_c || ad_c != expected_ad_c) {
    return make_error(Errc::IdMismatch, "authenticator identity does not match ticket");
  }
  if (std::llabs(ts - now) > skew) {
    return make_error(Errc::SkewExceeded, "authenticator outside the clock-skew window");
  }
  Authenticator a{id_c, ad_c, ts, cusec};
  if (!cache.check_and_insert(a, now)) {
    return make_error(Errc::ReplayDetected, "authenticator already presented");
  }
  return a;
}

// ---------------------------------------------------------------- client side

std::string build_as_request(std::string_view id_c, std::string_view id_tgs,
                             const wire::Address& ad_c, Timestamp ts) {
  Json j{{"type", "AS_REQ"}, {"id_c", id_c}, {"id_tgs", id_tgs}, {"ad_c", ad_c.render()},
         {"ts", ts}};
  return j.dump();
}

Result<TgtCredential> open_as_reply(const SymmetricKey& password_key, std::string_view reply) {
  KESIC_TRY(j, parse_reply(reply, "AS_REP"));
  KESIC_TRY(enc, field<std::string>(j, "enc"));
  KESIC_TRY(inner, open_json(password_key, enc));
  KESIC_TRY(k, key_field(inner, "k_c_tgs", crypto::KeyRole::session));
  KESIC_TRY(lf2, field<Timestamp>(inner, "lf2"));
  KESIC_TRY(tgt, field<std::string>(inner, "tgt"));
  return TgtCredential{tgt, k, lf2};
}

std::string build_tgs_request(const TgtCredential& tgt, std::string_view id_v,
                              const Authenticator& auth, RandomSource& rng) {
  Json j{{"type", "TGS_REQ"},
         {"id_v", id_v},
         {"tgt", tgt.tgt},
         {"authenticator", seal_authenticator(tgt.session_key, auth, rng)}};
  return j.dump();
}

Result<ServiceCredential> open_tgs_reply(const TgtCredential& tgt, std::string_view reply) {
  KESIC_TRY(j, parse_reply(reply, "TGS_REP"));
  KESIC_TRY(enc, field<std::string>(j, "enc"));
  KESIC_TRY(inner, open_json(tgt.session_key, enc));
  KESIC_TRY(k, key_field(inner, "k_c_v", crypto::KeyRole::session));
  KESIC_TRY(id_v, field<std::string>(inner, "id_v"));
  KESIC_TRY(lf4, field<Timestamp>(inner, "lf4"));
  KESIC_TRY(ticket, field<std::string>(inner, "ticket"));
  return ServiceCredential{id_v, ticket, k, lf4};
}

std::string build_ap_token(const ServiceCredential& cred, const Authenticator& auth,
                           RandomSource& rng) {
  Json j{{"ticket", cred.ticket}, {"authenticator", seal_authenticator(cred.session_key, auth, rng)}};
  return base64_encode(as_bytes(j.dump()));
}

// ---------------------------------------------------------------- service side

Result<ApContext> ApVerifier::verify(std::string_view token, Timestamp now) {
  auto raw = base64_decode(token);
  if (!raw) return make_error(Errc::AuthFailure, "token is not base64");
  auto outer = parse_json(to_string(*raw));
  if (!outer) return make_error(Errc::AuthFailure, "token is not JSON");
  KESIC_TRY(ticket_b64, field<std::string>(*outer, "ticket"));
  KESIC_TRY(auth_b64, field<std::string>(*outer, "authenticator"));

  KESIC_TRY(ticket, open_json(service_key_, ticket_b64));
  KESIC_TRY(id_v, field<std::string>(ticket, "id_v"));
  KESIC_TRY(lf4, field<Timestamp>(ticket, "lf4"));
  KESIC_TRY(id_c, field<std::string>(ticket, "id_c"));
  KESIC_TRY(ad_c, address_field(ticket, "ad_c"));
  KESIC_TRY(k, key_field(ticket, "k_c_v", crypto::KeyRole::session));
  if (id_v != service_id_) return make_error(Errc::IdMismatch, "ticket issued for " + id_v);
  if (lf4 <= now) return make_error(Errc::TicketExpired, "service ticket expired");

  KESIC_TRY(auth, verify_authenticator(k, auth_b64, id_c, ad_c, now, skew_, cache_));
  (void)auth;
  return ApContext{id_c, ad_c, k, lf4};
}

Json error_reply(const Error& e) {
  return Json{{"type", "KRB_ERROR"}, {"code", std::string(to_string(e.code))}};
}

std::optional<Error> as_error_reply(const Json& reply) {
  if (!reply.is_object() || reply.value("type", "") != "KRB_ERROR") return std::nullopt;
  return make_error(errc_from_string(reply.value("code", "")), "reported by KDC");
}

}  // namespace kesic::krb
