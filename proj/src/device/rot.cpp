#include "kesic/device/rot.hpp"

#include <cstdlib>
#include <fstream>

#include "kesic/common/json_io.hpp"

namespace kesic::device {

namespace fields = wire::fields;

std::uint64_t FileCounterStore::load() const {
  std::ifstream in(path_);
  std::uint64_t v = 0;
  in >> v;
  return v;
}

Status FileCounterStore::store(std::uint64_t value) {
  return write_file_atomic(path_, std::to_string(value) + "\n", /*owner_only=*/true);
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::accept: return "accept";
    case Outcome::invalid_request: return "invalid-request";
    case Outcome::ticket_expired: return "ticket-expired";
    case Outcome::invalid_counter: return "invalid-counter";
    case Outcome::auth_failure: return "auth-failure";
  }
  return "invalid-request";
}

std::string_view response_text(Outcome o) {
  switch (o) {
    case Outcome::accept: return "OK";
    case Outcome::invalid_request: return "Invalid Request";
    case Outcome::ticket_expired: return "Ticket Expired";
    case Outcome::invalid_counter: return "Invalid Counter";
    case Outcome::auth_failure: return "Auth Failure";
  }
  return "Invalid Request";
}

Result<Outcome> parse_outcome(std::string_view s) {
  for (auto o : {Outcome::accept, Outcome::invalid_request, Outcome::ticket_expired,
                 Outcome::invalid_counter, Outcome::auth_failure}) {
    if (s == to_string(o)) return o;
  }
  return make_error(Errc::ParseError, "unknown outcome " + std::string(s));
}

RootOfTrust::RootOfTrust(RotConfig config, RotKeys keys, CounterStore& counter,
                         const Clock& timer, RandomSource& rng)
    : config_(config), keys_(std::move(keys)), counter_(counter), timer_(timer), rng_(rng) {
  if (config_.window == 0 || config_.window > kMaxWindow) config_.window = 16;
}

// ---------------------------------------------------------------- sync

Result<std::string> RootOfTrust::begin_sync() {
  std::uint64_t next = counter_.load() + 1;
  // Persist before the frame exists, so a crash cannot reuse the value.
  KESIC_CHECK(counter_.store(next));
  pending_sync_ = next;
  return resend_sync();
}

Result<std::string> RootOfTrust::resend_sync() const {
  if (!pending_sync_) return make_error(Errc::NotSynced, "no sync in progress");
  auto mac = crypto::hmac(keys_.kl_sync, wire::sync_request_mac_input(config_.id, *pending_sync_));
  return wire::encode(wire::SyncRequest{config_.id, *pending_sync_, mac});
}

Result<std::string> RootOfTrust::answer_attest_request(std::string_view frame,
                                                       ByteView memory) const {
  if (config_.type != wire::DeviceType::power_constrained) {
    return make_error(Errc::AuthFailure, "general devices attest on request only");
  }
  if (!pending_sync_) return make_error(Errc::AuthFailure, "no sync in progress");
  KESIC_TRY(req, wire::decode_attest_request(frame));
  if (req.id_isv != config_.isv_id) return make_error(Errc::AuthFailure, "unknown ISV");
  auto mac = crypto::hmac(keys_.kl_sync, wire::attest_request_mac_input(req.id_isv, req.challenge));
  if (!crypto::tags_equal(mac, req.mac)) return make_error(Errc::AuthFailure, "attest request MAC");
  KESIC_TRY(k, crypto::derive_attestation_key(keys_.kl_key, req.challenge.text()));
  KESIC_TRY(report, crypto::attest_memory(k, memory));
  return wire::encode(wire::AttestResponse{config_.id, report});
}

Status RootOfTrust::accept_sync_response(std::string_view frame) {
  KESIC_TRY(resp, wire::decode_sync_response(frame));
  if (!pending_sync_) return make_error(Errc::AuthFailure, "unsolicited sync response");
  if (resp.id_isv != config_.isv_id) return make_error(Errc::AuthFailure, "unknown ISV");
  // The MAC is checked against the counter we sent, which makes co_sync the
  // nonce of the exchange.
  auto mac = crypto::hmac(keys_.kl_sync,
                          wire::sync_response_mac_input(resp.id_isv, *pending_sync_, resp.sync_val));
  if (!crypto::tags_equal(mac, resp.mac) || resp.co_sync != *pending_sync_) {
    return make_error(Errc::AuthFailure, "sync response MAC");
  }
  pending_sync_.reset();
  if (config_.type == wire::DeviceType::general) {
    start_time_ = resp.sync_val;
    timer_origin_ = timer_.now();
    seen_.clear();
  } else {
    if (resp.sync_val < 0) return make_error(Errc::AuthFailure, "negative counter base");
    window_base_ = static_cast<std::uint64_t>(resp.sync_val);
    used_.reset();
  }
  return ok_status();
}

bool RootOfTrust::synced() const {
  return config_.type == wire::DeviceType::general ? start_time_.has_value()
                                                   : window_base_.has_value();
}

Result<Timestamp> RootOfTrust::local_time() const {
  if (!start_time_) return make_error(Errc::NotSynced, "device has not synchronized");
  return *start_time_ + (timer_.now() - timer_origin_);
}

std::optional<std::pair<std::uint64_t, unsigned>> RootOfTrust::window() const {
  if (!window_base_) return std::nullopt;
  return std::make_pair(*window_base_, config_.window);
}

void RootOfTrust::power_cycle() {
  pending_sync_.reset();
  start_time_.reset();
  window_base_.reset();
  used_.reset();
  seen_.clear();
}

// ---------------------------------------------------------------- service

ServiceVerdict RootOfTrust::reject(Outcome o, std::string reason) const {
  return ServiceVerdict{o, std::move(reason), std::string(response_text(o))};
}

ServiceVerdict RootOfTrust::accept(const SymmetricKey& session, wire::Command cmd,
                                   ByteView memory, const Actuator& act) {
  if (cmd == wire::Command::attest) {
    auto report = crypto::attest_memory(session, memory);
    if (!report) return reject(Outcome::invalid_request, report.error().message());
    return ServiceVerdict{Outcome::accept, "", "OK ATTEST " + report->hex()};
  }
  std::string body = "OK " + act(cmd);
  if (!config_.seal_responses) return ServiceVerdict{Outcome::accept, "", body};
  auto box = crypto::seal(session, as_bytes(body), rng_);
  return ServiceVerdict{Outcome::accept, "", "SEALED " + base64_encode(box.serialize())};
}

ServiceVerdict RootOfTrust::serve_g(std::string_view frame, ByteView memory, const Actuator& act) {
  auto req = wire::decode_service_request_g(frame);
  if (!req) return reject(Outcome::invalid_request, req.error().message());
  auto now = local_time();
  if (!now) return reject(Outcome::invalid_request, "not synced");

  // Cheapest checks first.
  if (std::llabs(req->ts - *now) > config_.freshness_window) {
    return reject(Outcome::invalid_request, "timestamp outside freshness window");
  }
  if (req->lifetime <= *now) return reject(Outcome::ticket_expired, "LF_6 passed");

  auto f = wire::ticket_fields_g(req->id_c, req->ad_c, req->lifetime, config_.id);
  if (!crypto::verify_iot_ticket_g(keys_.kl_tkt, f.id_c, f.ad_c, f.nonce, f.id_dev, req->ticket)) {
    return reject(Outcome::auth_failure, "ticket mismatch");
  }
  auto session = crypto::make_session_key_g(keys_.kl_key, f.id_c, f.ad_c, f.nonce, f.id_dev);
  if (!session) return reject(Outcome::auth_failure, session.error().message());
  auto expected = crypto::hmac(*session, wire::service_authenticator_input(req->ts));
  if (!crypto::tags_equal(expected, req->authenticator)) {
    return reject(Outcome::auth_failure, "authenticator mismatch");
  }

  // Seen-set closes the replay gap inside the freshness window. Only
  // authenticated requests get here, so forgeries cannot fill it.
  for (auto it = seen_.begin(); it != seen_.end();) {
    it = it->second < *now ? seen_.erase(it) : std::next(it);
  }
  auto key = std::make_pair(req->id_c.value(), req->ts);
  if (!seen_.emplace(key, req->ts + config_.freshness_window).second) {
    return reject(Outcome::invalid_request, "replayed authenticator");
  }
  return accept(*session, req->cmd, memory, act);
}

ServiceVerdict RootOfTrust::serve_pc(std::string_view frame, const Actuator& act) {
  auto req = wire::decode_service_request_pc(frame);
  if (!req) return reject(Outcome::invalid_request, req.error().message());
  if (!window_base_) return reject(Outcome::invalid_request, "not synced");
  if (req->cmd == wire::Command::attest) {
    return reject(Outcome::invalid_request, "ATTEST is not offered by power-constrained devices");
  }

  std::uint64_t base = *window_base_;
  if (req->co_pc <= base || req->co_pc > base + config_.window) {
    return reject(Outcome::invalid_counter, "co_pc outside counter window");
  }
  std::size_t slot = static_cast<std::size_t>(req->co_pc - base - 1);
  if (used_.test(slot)) return reject(Outcome::invalid_counter, "co_pc already used");

  auto f = wire::ticket_fields_pc(req->id_c, req->ad_c, req->co_pc, config_.id);
  if (!crypto::verify_iot_ticket_pc(keys_.kl_tkt, f.id_c, f.ad_c, f.nonce, f.id_dev, req->ticket)) {
    return reject(Outcome::auth_failure, "ticket mismatch");
  }
  auto session = crypto::make_session_key_pc(keys_.kl_key, f.id_c, f.ad_c, f.nonce, f.id_dev);
  if (!session) return reject(Outcome::auth_failure, session.error().message());
  used_.set(slot);
  return accept(*session, req->cmd, {}, act);
}

}  // namespace kesic::device
