#include "kesic/isv/isv.hpp"

#include <algorithm>

namespace kesic::isv {

namespace fields = wire::fields;

namespace {

constexpr std::size_t kSeenReports = 32;
constexpr std::string_view kAuthScheme = "Kerberos ";

Json error_body(const Error& e) {
  return Json{{"error", std::string(to_string(e.code))}, {"detail", e.detail}};
}

}  // namespace

int http_status_for(Errc code) {
  switch (code) {
    case Errc::KerberosAuthFailure: return 401;
    case Errc::NotAuthorized: return 403;
    case Errc::UnknownDevice: return 404;
    case Errc::DeviceAsleep:
    case Errc::DeviceUnhealthy:
    case Errc::TicketBudgetExhausted: return 409;
    default: return 400;
  }
}

Isv::Isv(Registry registry, IsvConfig config, const Clock& clock, RandomSource& rng)
    : registry_(std::move(registry)),
      config_(std::move(config)),
      clock_(clock),
      rng_(rng),
      ap_(registry_.identity().service_id, registry_.identity().service_key, config_.clock_skew) {}

Status Isv::load_snapshot() {
  if (config_.snapshot_path.empty() || !std::filesystem::exists(config_.snapshot_path)) {
    return ok_status();
  }
  KESIC_TRY(snap, read_json_file(config_.snapshot_path));
  return registry_.restore(snap);
}

void Isv::persist() {
  if (config_.snapshot_path.empty()) return;
  std::lock_guard lock(persist_mu_);
  (void)write_file_atomic(config_.snapshot_path, registry_.snapshot().dump(2) + "\n");
}

wire::SyncResponse Isv::make_sync_response(const DeviceRecord& rec, std::uint64_t co_sync,
                                           Timestamp sync_val) const {
  const auto& id_isv = registry_.identity().id;
  auto mac = crypto::hmac(rec.keys.kl_sync,
                          wire::sync_response_mac_input(id_isv, co_sync, sync_val));
  return wire::SyncResponse{id_isv, co_sync, sync_val, mac};
}

// ---------------------------------------------------------------- sync manager

SyncOutcome Isv::handle_sync_request(const std::string& from, std::string_view frame) {
  auto req = wire::decode_sync_request(frame);
  if (!req) return SyncOutcome{req.error(), std::nullopt};
  Timestamp now = clock_.now();

  auto outcome = registry_.with_device(req->id_dev, [&](DeviceRecord& rec) -> Result<Outbound> {
    auto expected =
        crypto::hmac(rec.keys.kl_sync, wire::sync_request_mac_input(rec.id, req->co_sync));
    if (!crypto::tags_equal(expected, req->mac)) {
      return make_error(Errc::AuthFailure, "sync request MAC");
    }
    // Equal covers a retransmission after a lost response.
    if (req->co_sync != rec.co_sync && req->co_sync != rec.co_sync + 1) {
      return make_error(Errc::CounterOutOfRange, "received " + std::to_string(req->co_sync) +
                                                     ", local " + std::to_string(rec.co_sync));
    }
    rec.co_sync = req->co_sync;

    if (rec.type == DeviceType::general) {
      return Outbound{from, wire::encode(make_sync_response(rec, rec.co_sync, now))};
    }

    // Dev_pc: a new wake cycle starts; nothing is granted until it attests.
    rec.awake = false;
    rec.healthy = false;
    rec.quarantined = false;
    wire::Challenge challenge;
    {
      std::lock_guard lock(rng_mu_);
      challenge = wire::Challenge::generate(rng_);
    }
    rec.pending = PendingAttestation{challenge, rec.co_sync, from, now + config_.attest_timeout};
    const auto& id_isv = registry_.identity().id;
    auto mac = crypto::hmac(rec.keys.kl_sync, wire::attest_request_mac_input(id_isv, challenge));
    return Outbound{from, wire::encode(wire::AttestRequest{id_isv, challenge, mac})};
  });
  if (!outcome) return SyncOutcome{outcome.error(), std::nullopt};
  persist();
  return SyncOutcome{ok_status(), std::move(outcome).value()};
}

SyncOutcome Isv::handle_attest_response(const std::string& from, std::string_view frame) {
  (void)from;
  auto resp = wire::decode_attest_response(frame);
  if (!resp) return SyncOutcome{resp.error(), std::nullopt};
  Timestamp now = clock_.now();

  auto outcome = registry_.with_device(resp->id_dev, [&](DeviceRecord& rec) -> Result<Outbound> {
    if (rec.type != DeviceType::power_constrained) {
      return make_error(Errc::AuthFailure, "device does not attest at sync");
    }
    if (!rec.pending) return make_error(Errc::AuthFailure, "no outstanding challenge");
    // A fresh challenge makes every genuine report unique, so a repeat is a replay.
    for (const auto& seen : rec.seen_reports) {
      if (crypto::tags_equal(seen, resp->attst_hmac)) {
        return make_error(Errc::AuthFailure, "replayed attestation report");
      }
    }
    auto pending = *rec.pending;
    if (now > pending.deadline) {
      rec.pending.reset();
      return make_error(Errc::Timeout, "attestation answered after deadline");
    }
    rec.pending.reset();
    rec.seen_reports.push_back(resp->attst_hmac);
    if (rec.seen_reports.size() > kSeenReports) rec.seen_reports.pop_front();

    KESIC_TRY(k, crypto::derive_attestation_key(rec.keys.kl_key, pending.challenge.text()));
    auto expected = crypto::attest_digest(k, rec.reference_hash);
    if (!crypto::tags_equal(expected, resp->attst_hmac)) {
      rec.quarantined = true;
      rec.healthy = false;
      rec.awake = false;
      return make_error(Errc::AttestationMismatch, "device " + rec.name + " quarantined");
    }

    // max() keeps co_pc monotone when two wake cycles start within one second
    // or the wall clock steps back.
    rec.co_pc = std::max<std::uint64_t>(static_cast<std::uint64_t>(now), rec.co_pc);
    rec.pc_base = rec.co_pc;
    rec.awake = true;
    rec.healthy = true;
    rec.awake_until = now + config_.awake_period;
    auto sync_val = static_cast<Timestamp>(rec.co_pc);
    return Outbound{pending.device_addr,
                    wire::encode(make_sync_response(rec, pending.co_sync, sync_val))};
  });
  if (!outcome) {
    if (outcome.code() == Errc::AttestationMismatch) persist();
    return SyncOutcome{outcome.error(), std::nullopt};
  }
  persist();
  return SyncOutcome{ok_status(), std::move(outcome).value()};
}

// ---------------------------------------------------------------- ticket manager

Result<wire::TicketResponseJson> Isv::issue(const Requester& who, const wire::NumericId& dev,
                                            Timestamp now) {
  KESIC_TRY(ts_text, wire::render_timestamp(fields::ts, now));
  return registry_.with_device(dev, [&](DeviceRecord& rec) -> Result<wire::TicketResponseJson> {
    if (!rec.allow_list.count(who.name)) {
      return make_error(Errc::NotAuthorized, who.name + " may not use " + rec.name);
    }
    wire::TicketFields f;
    crypto::HmacTag ticket;
    std::optional<crypto::SymmetricKey> session;
    if (rec.type == DeviceType::general) {
      f = wire::ticket_fields_g(who.id_c, who.ad_c, now + config_.iot_ticket_lifetime, rec.id);
      KESIC_TRY(t, crypto::make_iot_ticket_g(rec.keys.kl_tkt, f.id_c, f.ad_c, f.nonce, f.id_dev));
      KESIC_TRY(k, crypto::make_session_key_g(rec.keys.kl_key, f.id_c, f.ad_c, f.nonce, f.id_dev));
      ticket = t;
      session = k;
    } else {
      if (rec.quarantined) return make_error(Errc::DeviceUnhealthy, rec.name + " failed attestation");
      if (!rec.awake || now >= rec.awake_until) {
        rec.awake = false;
        return make_error(Errc::DeviceAsleep, rec.name + " is not in a wake cycle");
      }
      if (!rec.healthy) return make_error(Errc::DeviceUnhealthy, rec.name + " not attested");
      if (rec.co_pc + 1 > rec.pc_base + rec.window) {
        return make_error(Errc::TicketBudgetExhausted, "counter window of " + rec.name + " is used up");
      }
      f = wire::ticket_fields_pc(who.id_c, who.ad_c, rec.co_pc + 1, rec.id);
      KESIC_TRY(t, crypto::make_iot_ticket_pc(rec.keys.kl_tkt, f.id_c, f.ad_c, f.nonce, f.id_dev));
      KESIC_TRY(k, crypto::make_session_key_pc(rec.keys.kl_key, f.id_c, f.ad_c, f.nonce, f.id_dev));
      rec.co_pc += 1;
      ticket = t;
      session = k;
    }
    return wire::TicketResponseJson{f.id_dev, f.nonce, session->hex(), ticket.hex(), ts_text};
  });
}

HttpReply Isv::handle_ticket(std::string_view authorization, std::string_view body) {
  Timestamp now = clock_.now();
  auto fail = [](const Error& e) {
    return HttpReply{http_status_for(e.code), error_body(e).dump(), e};
  };

  if (authorization.substr(0, kAuthScheme.size()) != kAuthScheme) {
    return fail(make_error(Errc::KerberosAuthFailure, "missing Kerberos authorization"));
  }
  auto ctx = ap_.verify(authorization.substr(kAuthScheme.size()), now);
  if (!ctx) return fail(make_error(Errc::KerberosAuthFailure, ctx.error().message()));

  auto j = parse_json(body);
  if (!j) return fail(j.error());
  auto req = wire::parse_ticket_request(*j);
  if (!req) return fail(req.error());
  if (req->user_name != ctx->id_c) {
    return fail(make_error(Errc::NotAuthorized, "user_name does not match Kerberos identity"));
  }
  auto dev = registry_.device_id(req->device_id);
  if (!dev) return fail(make_error(Errc::UnknownDevice, req->device_id));
  auto id_c = registry_.client_id(ctx->id_c);
  if (!id_c) return fail(make_error(Errc::NotAuthorized, ctx->id_c + " has no numeric id"));

  auto grant = issue(Requester{ctx->id_c, *id_c, ctx->ad_c}, *dev, now);
  if (!grant) return fail(grant.error());
  persist();

  std::string box;
  {
    std::lock_guard lock(rng_mu_);
    box = krb::seal_json(ctx->session_key, wire::to_json(*grant), rng_);
  }
  return HttpReply{200, Json{{"box", box}}.dump(), ok_status()};
}

}  // namespace kesic::isv
