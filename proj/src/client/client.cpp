#include "kesic/client/client.hpp"

#include <algorithm>

#include "kesic/wire/ticket_json.hpp"

namespace kesic::client {

using crypto::KeyRole;
namespace fields = wire::fields;

// ---------------------------------------------------------------- config

Result<ClientConfig> ClientConfig::from_json(const Json& j) {
  try {
    ClientConfig c;
    c.name = j.at("name").get<std::string>();
    KESIC_TRY(id, wire::NumericId::parse(j.at("id").get<std::string>()));
    KESIC_TRY(ad, wire::Address::from_ipv4(j.value("address", "127.0.0.1")));
    c.id_c = id;
    c.ad_c = ad;
    c.isv_service = j.value("isv_service", "isv");
    c.tgs_id = j.value("tgs_id", std::string(krb::kDefaultTgsId));
    c.kdc_addr = j.value("kdc", "");
    c.isv_url = j.value("isv_url", "");
    c.device_retries = j.value("device_retries", 2);
    const Json devices = j.value("devices", Json::object());
    for (const auto& [name, addr] : devices.items()) c.device_addrs[name] = addr.get<std::string>();
    return c;
  } catch (const Json::exception& e) {
    return make_error(Errc::ParseError, std::string("client config: ") + e.what());
  }
}

Result<ClientConfig> ClientConfig::load(const std::filesystem::path& path) {
  KESIC_TRY(j, read_json_file(path));
  return from_json(j);
}

// ---------------------------------------------------------------- cache

Timestamp DeviceEntry::lifetime() const {
  auto t = wire::parse_timestamp(fields::lifetime, nonce);
  return t ? *t : 0;
}

std::uint64_t DeviceEntry::co_pc() const {
  auto c = wire::parse_counter(fields::co_pc, nonce);
  return c ? *c : 0;
}

namespace {

Json entry_json(const DeviceEntry& e) {
  return Json{{"device_id", e.device_id.render()},
              {"type", std::string(wire::to_string(e.type))},
              {"nonce", e.nonce},
              {"session_key", e.session_key.hex()},
              {"ticket", e.ticket.hex()},
              {"issued", e.issued},
              {"last_ts", e.last_ts}};
}

Result<DeviceEntry> parse_entry(const Json& j) {
  KESIC_TRY(id, wire::NumericId::parse(j.at("device_id").get<std::string>()));
  KESIC_TRY(type, wire::parse_device_type(j.at("type").get<std::string>()));
  KESIC_TRY(key, SymmetricKey::from_hex(j.at("session_key").get<std::string>(), KeyRole::session));
  KESIC_TRY(ticket, crypto::HmacTag::from_hex(j.at("ticket").get<std::string>()));
  return DeviceEntry{id,     type, j.at("nonce").get<std::string>(), key, ticket,
                     j.value("issued", Timestamp{0}), j.value("last_ts", Timestamp{0})};
}

// Device class from the width of the grant's nonce.
Result<wire::DeviceType> type_from_nonce(std::string_view nonce) {
  if (nonce.size() == fields::lifetime.width) return wire::DeviceType::general;
  if (nonce.size() == fields::co_pc.width) return wire::DeviceType::power_constrained;
  return make_error(Errc::FieldWidthError, "nonce width " + std::to_string(nonce.size()));
}

}  // namespace

Result<CredentialCache> CredentialCache::open(const std::filesystem::path& path) {
  CredentialCache cache;
  if (std::filesystem::exists(path)) {
    KESIC_TRY(j, read_json_file(path));
    KESIC_TRY(loaded, from_json(j));
    cache = std::move(loaded);
  }
  cache.path_ = path;
  return cache;
}

Status CredentialCache::save() const {
  if (path_.empty()) return ok_status();
  return write_file_atomic(path_, to_json().dump(2) + "\n", /*owner_only=*/true);
}

Json CredentialCache::to_json() const {
  Json j{{"principal", principal}, {"cusec", cusec}};
  if (tgt) {
    j["tgt"] = {{"tgt", tgt->tgt}, {"session_key", tgt->session_key.hex()}, {"lf2", tgt->lf2}};
  }
  Json svc = Json::object();
  for (const auto& [id, c] : services) {
    svc[id] = {{"ticket", c.ticket}, {"session_key", c.session_key.hex()}, {"lf4", c.lf4}};
  }
  j["services"] = svc;
  Json devs = Json::object();
  for (const auto& [name, e] : devices) devs[name] = entry_json(e);
  j["devices"] = devs;
  return j;
}

Result<CredentialCache> CredentialCache::from_json(const Json& j) {
  try {
    CredentialCache c;
    c.principal = j.value("principal", "");
    c.cusec = j.value("cusec", 0u);
    if (j.contains("tgt")) {
      const auto& t = j.at("tgt");
      KESIC_TRY(k, SymmetricKey::from_hex(t.at("session_key").get<std::string>(), KeyRole::session));
      c.tgt = krb::TgtCredential{t.at("tgt").get<std::string>(), k, t.at("lf2").get<Timestamp>()};
    }
    const Json services = j.value("services", Json::object());
    for (const auto& [id, s] : services.items()) {
      KESIC_TRY(k, SymmetricKey::from_hex(s.at("session_key").get<std::string>(), KeyRole::session));
      c.services.emplace(id, krb::ServiceCredential{id, s.at("ticket").get<std::string>(), k,
                                                    s.at("lf4").get<Timestamp>()});
    }
    const Json devices = j.value("devices", Json::object());
    for (const auto& [name, d] : devices.items()) {
      KESIC_TRY(e, parse_entry(d));
      c.devices.emplace(name, e);
    }
    return c;
  } catch (const Json::exception& e) {
    return make_error(Errc::ParseError, std::string("credential cache: ") + e.what());
  }
}

void CredentialCache::purge(Timestamp now) {
  if (tgt && tgt->lf2 <= now) tgt.reset();
  std::erase_if(services, [now](const auto& kv) { return kv.second.lf4 <= now; });
}

void CredentialCache::clear() {
  principal.clear();
  tgt.reset();
  services.clear();
  devices.clear();
}

// ---------------------------------------------------------------- replies

Result<DeviceReply> parse_device_reply(std::string_view raw, const SymmetricKey& session) {
  std::string text(raw);
  if (raw.substr(0, 7) == "SEALED ") {
    auto bytes = base64_decode(raw.substr(7));
    if (!bytes) return make_error(Errc::AuthFailure, "sealed response is not base64");
    KESIC_TRY(box, crypto::SealedBox::parse(*bytes));
    KESIC_TRY(plain, crypto::open(session, box));
    text = to_string(plain);
  }
  using device::Outcome;
  if (text == "OK" || text.rfind("OK ", 0) == 0) return DeviceReply{Outcome::accept, text};
  for (auto o : {Outcome::invalid_request, Outcome::ticket_expired, Outcome::invalid_counter,
                 Outcome::auth_failure}) {
    if (text == device::response_text(o)) return DeviceReply{o, text};
  }
  return make_error(Errc::ParseError, "unrecognized device response");
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::AuthFailure:
    case Errc::KerberosAuthFailure:
    case Errc::TicketExpired:
    case Errc::SkewExceeded:
    case Errc::ReplayDetected:
    case Errc::IdMismatch:
    case Errc::UnknownPrincipal:
    case Errc::EmptyPassword:
      return kExitAuth;
    case Errc::NotAuthorized:
    case Errc::DeviceAsleep:
    case Errc::DeviceUnhealthy:
    case Errc::TicketBudgetExhausted:
    case Errc::UnknownDevice:
      return kExitPolicy;
    case Errc::DeviceRejected:
      return kExitDevice;
    case Errc::Timeout:
    case Errc::TransportError:
      return kExitTransport;
    case Errc::AttestationMismatch:
      return kExitCompromised;
    default:
      return kExitUsage;
  }
}

// ---------------------------------------------------------------- SDK

Status Client::save() { return cache_.save(); }

krb::Authenticator Client::next_authenticator() {
  return krb::Authenticator{config_.name, config_.ad_c, clock_.now(), ++cache_.cusec};
}

Status Client::login(std::string_view password) {
  KESIC_TRY(pk, crypto::derive_password_key(password, as_bytes(config_.name)));
  auto req = krb::build_as_request(config_.name, config_.tgs_id, config_.ad_c, clock_.now());
  KESIC_TRY(reply, kdc_.exchange(req));
  KESIC_TRY(tgt, krb::open_as_reply(pk, reply));
  // A new login replaces everything tied to the previous one.
  cache_.clear();
  cache_.principal = config_.name;
  cache_.tgt = tgt;
  return save();
}

Result<krb::ServiceCredential> Client::isv_credential() {
  Timestamp now = clock_.now();
  cache_.purge(now);
  if (auto it = cache_.services.find(config_.isv_service); it != cache_.services.end()) {
    return it->second;
  }
  if (!cache_.tgt) return make_error(Errc::TicketExpired, "no valid TGT; log in again");
  auto req = krb::build_tgs_request(*cache_.tgt, config_.isv_service, next_authenticator(), rng_);
  KESIC_TRY(reply, kdc_.exchange(req));
  KESIC_TRY(cred, krb::open_tgs_reply(*cache_.tgt, reply));
  cache_.services.insert_or_assign(config_.isv_service, cred);
  KESIC_CHECK(save());
  return cred;
}

Result<DeviceEntry> Client::get_iot_ticket(const std::string& device) {
  KESIC_TRY(cred, isv_credential());
  auto token = krb::build_ap_token(cred, next_authenticator(), rng_);
  wire::TicketRequestJson body{config_.name, device};
  KESIC_TRY(http, isv_.post_ticket("Kerberos " + token, wire::to_json(body).dump()));

  auto j = parse_json(http.body);
  if (http.status != 200) {
    auto code = j && j->contains("error") ? errc_from_string(j->value("error", ""))
                                          : Errc::TransportError;
    // A refused service ticket is useless; fetch a new one next time.
    if (code == Errc::KerberosAuthFailure) cache_.services.erase(config_.isv_service);
    return make_error(code, j ? j->value("detail", "") : "HTTP " + std::to_string(http.status));
  }
  if (!j || !j->contains("box") || !j->at("box").is_string()) {
    return make_error(Errc::ParseError, "ticket reply has no box");
  }
  KESIC_TRY(plain, krb::open_json(cred.session_key, j->at("box").get<std::string>()));
  KESIC_TRY(grant, wire::parse_ticket_response(plain));
  KESIC_TRY(id, wire::NumericId::parse(grant.device_id));
  KESIC_TRY(type, type_from_nonce(grant.nonce));
  KESIC_TRY(key, SymmetricKey::from_hex(grant.session_key, KeyRole::session));
  KESIC_TRY(ticket, crypto::HmacTag::from_hex(grant.ticket));
  KESIC_TRY(issued, wire::parse_timestamp(fields::ts, grant.timestamp));

  DeviceEntry entry{id, type, grant.nonce, key, ticket, issued, 0};
  cache_.devices.insert_or_assign(device, entry);
  KESIC_CHECK(save());
  return entry;
}

Result<DeviceReply> Client::present(const std::string& device, DeviceEntry& entry,
                                    wire::Command cmd) {
  if (entry.type == wire::DeviceType::power_constrained) {
    // No retry: the nonce is single-use, so a lost reply needs a new ticket.
    wire::ServiceRequestPC req{cmd, config_.id_c, config_.ad_c, entry.co_pc(), entry.ticket};
    KESIC_TRY(raw, devices_.send(device, wire::encode(req)));
    return parse_device_reply(raw, entry.session_key);
  }

  Error last = make_error(Errc::Timeout, device);
  for (int attempt = 0; attempt <= config_.device_retries; ++attempt) {
    // Distinct TS per request keeps the device's (id_c, TS) seen-set happy.
    Timestamp ts = std::max(clock_.now(), entry.last_ts + 1);
    entry.last_ts = ts;
    auto auth = crypto::hmac(entry.session_key, wire::service_authenticator_input(ts));
    wire::ServiceRequestG req{cmd, config_.id_c, config_.ad_c, entry.lifetime(), entry.ticket,
                              ts, auth};
    auto raw = devices_.send(device, wire::encode(req));
    if (raw) return parse_device_reply(*raw, entry.session_key);
    last = raw.error();
    if (last.code != Errc::Timeout) break;
  }
  return last;
}

Result<DeviceReply> Client::call_device(const std::string& device, wire::Command cmd, bool force) {
  auto it = cache_.devices.find(device);
  if (it == cache_.devices.end()) {
    return make_error(Errc::TicketExpired, "no ticket cached for " + device);
  }
  DeviceEntry& entry = it->second;
  if (entry.type == wire::DeviceType::general && entry.lifetime() <= clock_.now() && !force) {
    return make_error(Errc::TicketExpired, "cached ticket for " + device + " has expired");
  }
  auto reply = present(device, entry, cmd);
  if (entry.type == wire::DeviceType::power_constrained &&
      (reply || reply.code() != Errc::Timeout)) {
    cache_.devices.erase(device);
  }
  KESIC_CHECK(save());
  return reply;
}

Result<AttestVerdict> Client::verify_attestation(const std::string& device,
                                                 ByteView expected_image, bool force) {
  auto it = cache_.devices.find(device);
  if (it != cache_.devices.end() && it->second.type != wire::DeviceType::general) {
    return make_error(Errc::InvalidArgument, "attestation as a service needs a general device");
  }
  KESIC_TRY(reply, call_device(device, wire::Command::attest, force));
  if (reply.outcome != device::Outcome::accept) {
    return make_error(Errc::DeviceRejected, std::string(device::to_string(reply.outcome)));
  }
  constexpr std::string_view kPrefix = "OK ATTEST ";
  if (reply.text.rfind(kPrefix, 0) != 0) return make_error(Errc::ParseError, "not an attestation");
  KESIC_TRY(report, crypto::HmacTag::from_hex(reply.text.substr(kPrefix.size())));
  const auto& key = cache_.devices.at(device).session_key;
  KESIC_TRY(expected, crypto::attest_memory(key, expected_image));
  return AttestVerdict{crypto::tags_equal(report, expected), report.hex()};
}

}  // namespace kesic::client
