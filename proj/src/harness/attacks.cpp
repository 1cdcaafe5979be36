#include "kesic/harness/attacks.hpp"

#include <map>
#include <set>

#include "kesic/harness/sim.hpp"
#include "kesic/wire/frames.hpp"

namespace kesic::harness {

namespace {

// Material the attacker can make up: identities are public, keys are not.
struct Forgery {
  Forgery(const Fleet& fleet, std::uint64_t seed) : fleet(fleet), rng(make_random(seed, "attacker")) {}

  crypto::HmacTag tag() {
    crypto::HmacTag t;
    rng->fill(t.bytes);
    return t;
  }
  const device::DeviceProfile& dev(const std::string& name) const { return *fleet.device(name); }
  const client::ClientConfig& client(const std::string& name) const { return fleet.clients.at(name); }

  const Fleet& fleet;
  std::unique_ptr<RandomSource> rng;
};

void substitute(std::string& text, const std::string& key, const std::string& frame) {
  auto quoted = Json(frame).dump();
  for (auto at = text.find(key); at != std::string::npos; at = text.find(key, at + quoted.size())) {
    text.replace(at, key.size(), quoted);
  }
}

Attack make(std::string name, std::string leg, std::string capability, std::string description,
            std::string steps_json, const std::map<std::string, std::string>& frames = {}) {
  for (const auto& [key, frame] : frames) substitute(steps_json, key, frame);
  Attack a{std::move(name), std::move(leg), std::move(capability), {}};
  a.scenario.name = a.name;
  a.scenario.description = std::move(description);
  for (auto& step : Json::parse(steps_json)) a.scenario.steps.push_back(std::move(step));
  return a;
}

constexpr const char* kLampReady = R"(
  {"do": "boot", "device": "lamp", "expect": "ok"},
  {"do": "login", "client": "alice", "expect": "ok"},
  {"do": "ticket", "client": "alice", "device": "lamp", "expect": "ok"})";

constexpr const char* kSensorReady = R"(
  {"do": "boot", "device": "sensor", "expect": "ok"},
  {"do": "login", "client": "alice", "expect": "ok"},
  {"do": "ticket", "client": "alice", "device": "sensor", "expect": "ok"})";

std::string with_prefix(const char* prefix, const std::string& rest) {
  return std::string("[") + prefix + ",\n" + rest + "]";
}

}  // namespace

const std::vector<std::string>& required_isv_verdicts() {
  static const std::vector<std::string> v = {
      "UnknownDevice",       "CounterOutOfRange", "AuthFailure",   "AttestationMismatch",
      "Timeout",             "KerberosAuthFailure", "NotAuthorized", "DeviceAsleep",
      "DeviceUnhealthy",     "TicketBudgetExhausted"};
  return v;
}

const std::vector<std::string>& required_device_verdicts() {
  static const std::vector<std::string> v = {"AuthFailure",     "Timeout",        "not-synced",
                                             "invalid-request", "ticket-expired", "invalid-counter",
                                             "auth-failure",    "DeviceAsleep"};
  return v;
}

std::vector<Attack> attack_catalog(const Fleet& fleet, std::uint64_t seed) {
  Forgery f(fleet, seed);
  const Timestamp t0 = fleet.spec.start_time;
  const auto& lamp = f.dev("lamp");
  const auto& sensor = f.dev("sensor");
  const auto& alice = f.client("alice");

  std::vector<Attack> out;

  // ---------------------------------------------------------------- all legs
  out.push_back(make("eavesdrop-full-session", "all", "eavesdrop",
                     "Every leg runs once; no key, password or session key may appear on the wire.",
                     R"([
    {"do": "boot", "device": "lamp", "expect": "ok"},
    {"do": "boot", "device": "sensor", "expect": "ok"},
    {"do": "login", "client": "alice", "expect": "ok"},
    {"do": "ticket", "client": "alice", "device": "lamp", "expect": "ok"},
    {"do": "call", "client": "alice", "device": "lamp", "cmd": "LED_ON", "expect": "accept"},
    {"do": "attest", "client": "alice", "device": "lamp", "expect": "healthy"},
    {"do": "ticket", "client": "alice", "device": "sensor", "expect": "ok"},
    {"do": "call", "client": "alice", "device": "sensor", "cmd": "LED_ON", "expect": "accept"},
    {"do": "login", "client": "bob", "expect": "ok"},
    {"do": "ticket", "client": "bob", "device": "lamp", "expect": "ok"},
    {"do": "call", "client": "bob", "device": "lamp", "cmd": "LED_OFF", "expect": "accept"}
  ])"));

  // ---------------------------------------------------------------- AS
  out.push_back(make("as-wrong-password", "as", "impersonate",
                     "Guessing a password yields a reply the guesser cannot open.", R"([
    {"do": "login", "client": "alice", "password": "letmein", "expect": "AuthFailure",
     "expect_data": {"tgt_cached": false}}
  ])"));
  out.push_back(make("as-replay", "as", "replay",
                     "A replayed AS_REQ gets a fresh reply that only the password opens.", R"([
    {"do": "login", "client": "alice", "expect": "ok"},
    {"do": "replay", "kind": "AS_REQ", "as": "attacker", "open_with_password": "letmein",
     "expect": "AuthFailure"}
  ])"));
  out.push_back(make("as-tamper-reply", "as", "tamper",
                     "Flipping a byte of the sealed AS reply makes it unopenable.", R"([
    {"do": "adversary", "action": "tamper", "kind": "AS_REP", "offset": 40, "xor": 1, "count": 1},
    {"do": "login", "client": "alice", "expect": "AuthFailure", "expect_data": {"tgt_cached": false}},
    {"do": "login", "client": "alice", "expect": "ok"}
  ])"));

  // ---------------------------------------------------------------- TGS
  out.push_back(make("tgs-replay", "tgs", "replay", "A TGS_REQ replayed inside the skew window.",
                     R"([
    {"do": "login", "client": "alice", "expect": "ok"},
    {"do": "ticket", "client": "alice", "device": "lamp", "expect": "ok"},
    {"do": "replay", "kind": "TGS_REQ", "as": "attacker", "expect": "ReplayDetected"}
  ])"));
  out.push_back(make("tgs-replay-after-tgt-expiry", "tgs", "replay",
                     "A recorded TGS_REQ outlives its TGT.", R"([
    {"do": "login", "client": "alice", "expect": "ok"},
    {"do": "ticket", "client": "alice", "device": "lamp", "expect": "ok"},
    {"do": "advance", "seconds": 36001},
    {"do": "replay", "kind": "TGS_REQ", "as": "attacker", "expect": "TicketExpired"}
  ])"));
  out.push_back(make("tgs-tamper-tgt", "tgs", "tamper", "A flipped byte inside the presented TGT.",
                     R"([
    {"do": "login", "client": "alice", "expect": "ok"},
    {"do": "adversary", "action": "tamper", "kind": "TGS_REQ", "offset": 60, "xor": 1, "count": 1},
    {"do": "ticket", "client": "alice", "device": "lamp", "expect": "AuthFailure"},
    {"do": "ticket", "client": "alice", "device": "lamp", "expect": "ok"}
  ])"));
  out.push_back(make("tgs-claim-other-identity", "tgs", "impersonate",
                     "Mallory presents their own TGT with an authenticator naming alice.", R"([
    {"do": "login", "client": "mallory", "expect": "ok"},
    {"do": "forge_tgs", "client": "mallory", "claim": "alice", "expect": "IdMismatch"}
  ])"));

  // ---------------------------------------------------------------- ISV ticket
  out.push_back(make("isv-ticket-replay", "isv-ticket", "replay",
                     "A recorded ticket request replayed to the ISV.", with_prefix(kLampReady, R"(
    {"do": "replay", "kind": "ticket_request", "as": "attacker", "expect": "KerberosAuthFailure"}
  )")));
  out.push_back(make("isv-ticket-tamper-request", "isv-ticket", "tamper",
                     "A flipped byte in the Kerberos token of the ticket request.", R"([
    {"do": "login", "client": "alice", "expect": "ok"},
    {"do": "adversary", "action": "tamper", "kind": "ticket_request", "offset": 40, "xor": 1,
     "count": 1},
    {"do": "ticket", "client": "alice", "device": "lamp", "expect": "KerberosAuthFailure"}
  ])"));
  out.push_back(make("isv-ticket-tamper-reply", "isv-ticket", "tamper",
                     "A flipped byte in the sealed IoT ticket grant.", R"([
    {"do": "login", "client": "alice", "expect": "ok"},
    {"do": "adversary", "action": "tamper", "kind": "ticket_reply", "offset": 50, "xor": 1,
     "count": 1},
    {"do": "ticket", "client": "alice", "device": "lamp", "expect": "AuthFailure"}
  ])"));
  out.push_back(make("isv-ticket-not-allowed", "isv-ticket", "impersonate",
                     "Authenticated principals outside a device's allow list.", R"([
    {"do": "login", "client": "mallory", "expect": "ok"},
    {"do": "ticket", "client": "mallory", "device": "lamp", "expect": "NotAuthorized"},
    {"do": "login", "client": "bob", "expect": "ok"},
    {"do": "ticket", "client": "bob", "device": "sensor", "expect": "NotAuthorized"}
  ])"));
  out.push_back(make("isv-ticket-unknown-device", "isv-ticket", "impersonate",
                     "A ticket for a device the ISV never registered.", R"([
    {"do": "login", "client": "alice", "expect": "ok"},
    {"do": "ticket", "client": "alice", "device": "toaster", "expect": "UnknownDevice"}
  ])"));
  out.push_back(make("isv-ticket-device-asleep", "isv-ticket", "drop-delay",
                     "No Dev_pc ticket while the device is outside its awake period.", R"([
    {"do": "login", "client": "alice", "expect": "ok"},
    {"do": "ticket", "client": "alice", "device": "sensor", "expect": "DeviceAsleep"},
    {"do": "boot", "device": "sensor", "expect": "ok"},
    {"do": "advance", "seconds": 61},
    {"do": "ticket", "client": "alice", "device": "sensor", "expect": "DeviceAsleep"}
  ])"));
  {
    std::string steps = R"({"do": "boot", "device": "sensor", "expect": "ok"},
    {"do": "login", "client": "alice", "expect": "ok"})";
    auto window = sensor.rot.window;
    for (unsigned i = 0; i < window; ++i) {
      steps += R"(,
    {"do": "ticket", "client": "alice", "device": "sensor", "expect": "ok"})";
    }
    steps += R"(,
    {"do": "ticket", "client": "alice", "device": "sensor", "expect": "TicketBudgetExhausted"})";
    out.push_back(make("isv-ticket-budget", "isv-ticket", "impersonate",
                       "Hoarding Dev_pc tickets stops at the device's counter window.",
                       "[" + steps + "]"));
  }

  // ---------------------------------------------------------------- sync
  out.push_back(make("sync-replay-request", "sync", "replay",
                     "An old SyncRequest replayed after later boots.", R"([
    {"do": "boot", "device": "lamp", "expect": "ok"},
    {"do": "boot", "device": "lamp", "expect": "ok"},
    {"do": "replay", "kind": "sync_request", "nth": 0, "as": "attacker", "expect": "CounterOutOfRange"}
  ])"));
  out.push_back(make("sync-replay-response", "sync", "replay",
                     "The previous boot's SyncResponse replayed into a pending sync.", R"([
    {"do": "boot", "device": "lamp", "expect": "ok"},
    {"do": "adversary", "action": "drop", "kind": "sync_response", "count": 1},
    {"do": "boot", "device": "lamp", "expect": "Timeout"},
    {"do": "replay", "kind": "sync_response", "nth": 0, "as": "attacker", "expect": "AuthFailure"},
    {"do": "check", "device": "lamp", "synced": false},
    {"do": "retransmit", "device": "lamp", "expect": "ok"}
  ])"));
  out.push_back(make("sync-tamper-request", "sync", "tamper", "A flipped MAC byte in SyncRequest.",
                     R"([
    {"do": "adversary", "action": "tamper", "kind": "sync_request", "field": "mac", "xor": 1, "hex": true,
     "count": 1},
    {"do": "boot", "device": "lamp", "expect": "AuthFailure"}
  ])"));
  out.push_back(make("sync-tamper-response", "sync", "tamper",
                     "A shifted sync value in SyncResponse.", R"([
    {"do": "adversary", "action": "tamper", "kind": "sync_response", "field": "sync_val",
     "index": 31, "xor": 1, "count": 1},
    {"do": "boot", "device": "lamp", "expect": "AuthFailure"},
    {"do": "check", "device": "lamp", "synced": false}
  ])"));
  out.push_back(make("sync-forged-request", "sync", "impersonate",
                     "SyncRequests forged for a registered and an unregistered device id.", R"([
    {"do": "inject", "to": "isv:sync", "text": @REQ_LAMP@, "expect": "AuthFailure"},
    {"do": "inject", "to": "isv:sync", "text": @REQ_UNKNOWN@, "expect": "UnknownDevice"},
    {"do": "boot", "device": "lamp", "expect": "ok"}
  ])",
                     {{"@REQ_LAMP@", wire::encode(wire::SyncRequest{lamp.rot.id, 5, f.tag()})},
                      {"@REQ_UNKNOWN@",
                       wire::encode(wire::SyncRequest{wire::NumericId::make(99).value(), 1, f.tag()})}}));
  out.push_back(make("sync-forged-response", "sync", "impersonate",
                     "A forged SyncResponse answering the device's pending sync.", R"([
    {"do": "adversary", "action": "drop", "kind": "sync_response", "count": 1},
    {"do": "boot", "device": "lamp", "expect": "Timeout"},
    {"do": "inject", "to": "lamp", "text": @RESP@, "expect": "AuthFailure"},
    {"do": "retransmit", "device": "lamp", "expect": "ok"}
  ])",
                     {{"@RESP@", wire::encode(wire::SyncResponse{lamp.rot.isv_id, 1, t0 + 9999, f.tag()})}}));
  out.push_back(make("sync-lost-response", "sync", "drop-delay",
                     "A lost SyncResponse; the retransmission reuses the counter.", R"([
    {"do": "adversary", "action": "drop", "kind": "sync_response", "count": 1},
    {"do": "boot", "device": "lamp", "expect": "Timeout"},
    {"do": "retransmit", "device": "lamp", "expect": "ok"},
    {"do": "check", "device": "lamp", "synced": true}
  ])"));

  // ---------------------------------------------------------------- attestation
  out.push_back(make("attest-replay-response", "attest", "replay",
                     "Last wake's AttestResponse replayed into a new challenge.", R"([
    {"do": "boot", "device": "sensor", "expect": "ok"},
    {"do": "sleep", "device": "sensor"},
    {"do": "adversary", "action": "drop", "kind": "attest_response", "count": 1},
    {"do": "boot", "device": "sensor", "expect": "Timeout"},
    {"do": "replay", "kind": "attest_response", "nth": 0, "as": "attacker", "expect": "AuthFailure"}
  ])"));
  out.push_back(make("attest-tamper-request", "attest", "tamper", "A flipped MAC byte in AttestRequest.",
                     R"([
    {"do": "adversary", "action": "tamper", "kind": "attest_request", "field": "mac", "xor": 1, "hex": true,
     "count": 1},
    {"do": "boot", "device": "sensor", "expect": "AuthFailure"}
  ])"));
  out.push_back(make("attest-tamper-response", "attest", "tamper",
                     "A flipped report byte quarantines the device.", R"([
    {"do": "adversary", "action": "tamper", "kind": "attest_response", "field": "attst_hmac",
     "xor": 1, "hex": true, "count": 1},
    {"do": "boot", "device": "sensor", "expect": "AttestationMismatch"},
    {"do": "login", "client": "alice", "expect": "ok"},
    {"do": "ticket", "client": "alice", "device": "sensor", "expect": "DeviceUnhealthy"}
  ])"));
  out.push_back(make("attest-compromised-memory", "attest", "tamper",
                     "Modified program memory is caught on wake and on request.", R"([
    {"do": "boot", "device": "lamp", "expect": "ok"},
    {"do": "mutate_memory", "device": "lamp", "offset": 10, "xor": 255},
    {"do": "login", "client": "alice", "expect": "ok"},
    {"do": "ticket", "client": "alice", "device": "lamp", "expect": "ok"},
    {"do": "attest", "client": "alice", "device": "lamp", "expect": "compromised"},
    {"do": "mutate_memory", "device": "sensor", "offset": 10, "xor": 255},
    {"do": "boot", "device": "sensor", "expect": "AttestationMismatch"},
    {"do": "ticket", "client": "alice", "device": "sensor", "expect": "DeviceUnhealthy"}
  ])"));
  out.push_back(make("attest-forged-request", "attest", "impersonate",
                     "A forged AttestRequest during a pending sync.", R"([
    {"do": "adversary", "action": "drop", "kind": "attest_request", "count": 1},
    {"do": "boot", "device": "sensor", "expect": "Timeout"},
    {"do": "inject", "to": "sensor", "text": @ATT@, "expect": "AuthFailure"}
  ])",
                     {{"@ATT@", wire::encode(wire::AttestRequest{sensor.rot.isv_id,
                                                                 wire::Challenge::generate(*f.rng),
                                                                 f.tag()})}}));
  out.push_back(make("attest-delayed-response", "attest", "drop-delay",
                     "An AttestResponse held past the attestation timeout.", R"([
    {"do": "adversary", "action": "delay", "kind": "attest_response", "dt": 10},
    {"do": "boot", "device": "sensor", "expect": "Timeout"},
    {"do": "advance", "seconds": 10, "expect_data": {"verdicts": ["Timeout"]}},
    {"do": "check", "device": "sensor", "synced": false}
  ])"));

  // ---------------------------------------------------------------- Dev_g service
  out.push_back(make("g-replay-immediate", "service-g", "replay",
                     "A ServiceRequestG replayed inside the freshness window.", with_prefix(kLampReady, R"(
    {"do": "call", "client": "alice", "device": "lamp", "cmd": "LED_ON", "expect": "accept"},
    {"do": "replay", "kind": "service_request_g", "as": "attacker", "expect": "invalid-request",
     "expect_reason": "replay"}
  )")));
  out.push_back(make("g-replay-stale", "service-g", "replay",
                     "A ServiceRequestG replayed after the freshness window.", with_prefix(kLampReady, R"(
    {"do": "call", "client": "alice", "device": "lamp", "cmd": "LED_ON", "expect": "accept"},
    {"do": "call", "client": "alice", "device": "lamp", "cmd": "LED_OFF", "expect": "accept"},
    {"do": "advance", "seconds": 400},
    {"do": "replay", "kind": "service_request_g", "nth": 0, "as": "attacker",
     "expect": "invalid-request"},
    {"do": "check", "device": "lamp", "led": false}
  )")));
  out.push_back(make("g-tamper-lifetime", "service-g", "tamper",
                     "Extending the ticket lifetime in transit.", with_prefix(kLampReady, R"(
    {"do": "call", "client": "alice", "device": "lamp", "cmd": "LED_ON", "expect": "accept"},
    {"do": "replay", "kind": "service_request_g", "as": "attacker",
     "tamper": {"field": "lifetime", "index": 24, "xor": 8}, "expect": "auth-failure",
     "expect_reason": "ticket mismatch"}
  )")));
  out.push_back(make("g-tamper-fields", "service-g", "tamper",
                     "One flipped byte in each MAC-protected field.", with_prefix(kLampReady, R"(
    {"do": "call", "client": "alice", "device": "lamp", "cmd": "LED_ON", "expect": "accept"},
    {"do": "replay", "kind": "service_request_g", "as": "attacker",
     "tamper": {"field": "id_c", "index": 7, "xor": 1}, "expect": "auth-failure"},
    {"do": "replay", "kind": "service_request_g", "as": "attacker",
     "tamper": {"field": "ad_c", "index": 7, "xor": 1}, "expect": "auth-failure"},
    {"do": "replay", "kind": "service_request_g", "as": "attacker",
     "tamper": {"field": "ticket", "index": 0, "xor": 1, "hex": true}, "expect": "auth-failure"},
    {"do": "replay", "kind": "service_request_g", "as": "attacker",
     "tamper": {"field": "ts", "index": 27, "xor": 1}, "expect": "auth-failure"},
    {"do": "replay", "kind": "service_request_g", "as": "attacker",
     "tamper": {"field": "authenticator", "index": 0, "xor": 1, "hex": true},
     "expect": "auth-failure"}
  )")));
  out.push_back(make("g-expired-ticket", "service-g", "replay",
                     "A Dev_g ticket presented after its lifetime.", with_prefix(kLampReady, R"(
    {"do": "advance", "seconds": 601},
    {"do": "call", "client": "alice", "device": "lamp", "cmd": "LED_ON", "expect": "TicketExpired"},
    {"do": "call", "client": "alice", "device": "lamp", "cmd": "LED_ON", "force": true,
     "expect": "ticket-expired"}
  )")));
  out.push_back(make("g-forged-request", "service-g", "impersonate",
                     "A ServiceRequestG forged without the ticket key.", R"([
    {"do": "boot", "device": "lamp", "expect": "ok"},
    {"do": "inject", "to": "lamp", "text": @SRG@, "expect": "auth-failure"},
    {"do": "check", "device": "lamp", "led": false}
  ])",
                     {{"@SRG@", wire::encode(wire::ServiceRequestG{wire::Command::led_on, alice.id_c,
                                                                   alice.ad_c, t0 + 600, f.tag(), t0,
                                                                   f.tag()})}}));
  out.push_back(make("g-before-sync", "service-g", "drop-delay",
                     "A genuine ticket used before the device ever synchronized.", R"([
    {"do": "login", "client": "alice", "expect": "ok"},
    {"do": "ticket", "client": "alice", "device": "lamp", "expect": "ok"},
    {"do": "call", "client": "alice", "device": "lamp", "cmd": "LED_ON", "expect": "invalid-request"}
  ])"));

  // ---------------------------------------------------------------- Dev_pc service
  out.push_back(make("pc-replay", "service-pc", "replay", "A spent ServiceRequestPC replayed.",
                     with_prefix(kSensorReady, R"(
    {"do": "call", "client": "alice", "device": "sensor", "cmd": "LED_ON", "expect": "accept"},
    {"do": "replay", "kind": "service_request_pc", "as": "attacker", "expect": "invalid-counter"},
    {"do": "call", "client": "alice", "device": "sensor", "cmd": "LED_OFF", "reuse_consumed": true,
     "expect": "invalid-counter"}
  )")));
  out.push_back(make("pc-tamper", "service-pc", "tamper",
                     "Flipped bytes in the ticket and counter of a ServiceRequestPC.",
                     with_prefix(kSensorReady, R"(
    {"do": "call", "client": "alice", "device": "sensor", "cmd": "LED_ON", "expect": "accept"},
    {"do": "replay", "kind": "service_request_pc", "as": "attacker",
     "tamper": {"field": "co_pc", "index": 23, "xor": 2}, "expect": "auth-failure"},
    {"do": "adversary", "action": "tamper", "kind": "service_request_pc", "field": "ticket",
     "index": 0, "xor": 1, "hex": true, "count": 1},
    {"do": "ticket", "client": "alice", "device": "sensor", "expect": "ok"},
    {"do": "call", "client": "alice", "device": "sensor", "cmd": "LED_OFF", "expect": "auth-failure"},
    {"do": "check", "device": "sensor", "led": true}
  )")));
  out.push_back(make("pc-forged-request", "service-pc", "impersonate",
                     "ServiceRequestPCs forged inside and beyond the counter window.", R"([
    {"do": "boot", "device": "sensor", "expect": "ok"},
    {"do": "inject", "to": "sensor", "text": @IN@, "expect": "auth-failure"},
    {"do": "inject", "to": "sensor", "text": @OUT@, "expect": "invalid-counter"},
    {"do": "check", "device": "sensor", "led": false}
  ])",
                     {{"@IN@", wire::encode(wire::ServiceRequestPC{wire::Command::led_on, alice.id_c,
                                                                   alice.ad_c,
                                                                   static_cast<std::uint64_t>(t0) + 1,
                                                                   f.tag()})},
                      {"@OUT@", wire::encode(wire::ServiceRequestPC{
                                    wire::Command::led_on, alice.id_c, alice.ad_c,
                                    static_cast<std::uint64_t>(t0) + sensor.rot.window + 1, f.tag()})}}));
  out.push_back(make("pc-device-asleep", "service-pc", "drop-delay",
                     "A valid Dev_pc ticket sent while the device sleeps.", with_prefix(kSensorReady, R"(
    {"do": "sleep", "device": "sensor"},
    {"do": "call", "client": "alice", "device": "sensor", "cmd": "LED_ON", "expect": "Timeout"},
    {"do": "check", "device": "sensor", "led": false}
  )")));
  return out;
}

namespace {

void count(Json& tally, const std::string& key) {
  tally[key] = tally.value(key, 0) + 1;
}

// Tallies every rejection recorded in one scenario report.
void collect_coverage(const Fleet& fleet, const Json& report, Json& isv, Json& dev) {
  for (const auto& p : report.at("transcript")) {
    auto to = p.at("to").get<std::string>();
    auto verdict = p.value("verdict", "");
    if (verdict.empty() || verdict == "ok" || verdict == "accept") continue;
    if (to.rfind("isv:", 0) == 0) {
      count(isv, verdict);
    } else if (fleet.device(to)) {
      auto reason = p.value("reason", "");
      count(dev, verdict == "invalid-request" && reason == "not synced" ? "not-synced" : verdict);
    }
  }
  for (const auto& s : report.at("steps")) {
    auto what = s.at("step").at("do").get<std::string>();
    if ((what == "boot" || what == "retransmit") && s.at("verdict") == "Timeout") count(dev, "Timeout");
  }
}

}  // namespace

Json run_attack_suite(const Fleet& fleet, const SuiteOptions& options) {
  Json attacks = Json::array();
  Json reports = Json::array();
  Json isv = Json::object();
  Json dev = Json::object();
  std::size_t leaks = 0;
  bool all_passed = true;

  for (auto& attack : attack_catalog(fleet, options.seed)) {
    SimBackend backend(fleet, options.seed);
    Runner runner(fleet, backend, RunOptions{options.seed, true});
    Json report = runner.run(attack.scenario);
    collect_coverage(fleet, report, isv, dev);
    leaks += report.at("confidentiality").at("leaks").size();
    bool passed = report.at("passed").get<bool>();
    all_passed = all_passed && passed;
    attacks.push_back(Json{{"name", attack.name},
                           {"leg", attack.leg},
                           {"capability", attack.capability},
                           {"passed", passed},
                           {"first_failure", report.at("first_failure")}});
    if (!options.include_transcripts) report.erase("transcript");
    reports.push_back(std::move(report));
  }

  Json missing = Json::array();
  for (const auto& v : required_isv_verdicts()) {
    if (!isv.contains(v)) missing.push_back("isv:" + v);
  }
  for (const auto& v : required_device_verdicts()) {
    if (!dev.contains(v)) missing.push_back("device:" + v);
  }
  // Sorted keys keep the report stable however the catalogue is ordered.
  auto sorted = [](const Json& j) {
    std::map<std::string, Json> m;
    for (const auto& [k, v] : j.items()) m[k] = v;
    Json out = Json::object();
    for (auto& [k, v] : m) out[k] = v;
    return out;
  };

  return Json{{"suite", "attacks"},
              {"seed", options.seed},
              {"attacks", attacks},
              {"coverage", {{"isv", sorted(isv)}, {"device", sorted(dev)}, {"missing", missing}}},
              {"leaks", leaks},
              {"passed", all_passed && missing.empty() && leaks == 0},
              {"reports", reports}};
}

Result<Json> run_attack_suite(const SuiteOptions& options) {
  KESIC_TRY(fleet, Fleet::provision(FleetSpec::standard(), options.seed));
  return run_attack_suite(fleet, options);
}

}  // namespace kesic::harness
