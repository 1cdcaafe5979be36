#include "kesic/harness/scenario.hpp"

#include <algorithm>
#include <set>

#include "kesic/harness/probe.hpp"
#include "kesic/harness/sim.hpp"
#include "kesic/kdc/kerberos.hpp"
#include "kesic/wire/frames.hpp"

namespace kesic::harness {

StepOutcome outcome_of(const Error& e) { return StepOutcome{std::string(to_string(e.code)), e.detail}; }

StepOutcome outcome_of(const Status& st) {
  return st ? StepOutcome{"ok"} : outcome_of(st.error());
}

// ---------------------------------------------------------------- parsing

namespace {

struct StepShape {
  std::string_view name;
  std::vector<std::string_view> required;
  bool sim_only = false;
};

const std::vector<StepShape>& step_shapes() {
  static const std::vector<StepShape> shapes = {
      {"boot", {"device"}},
      {"retransmit", {"device"}},
      {"sleep", {"device"}},
      {"mutate_memory", {"device", "offset"}},
      {"check", {"device"}},
      {"advance", {"seconds"}},
      {"login", {"client"}},
      {"ticket", {"client", "device"}},
      {"call", {"client", "device", "cmd"}},
      {"attest", {"client", "device"}},
      {"forge_tgs", {"client", "claim"}},
      {"stop_isv", {}},
      {"restart_isv", {}},
      {"adversary", {"action"}, true},
      {"clear_adversary", {}, true},
      {"replay", {"kind"}, true},
      {"inject", {"to"}, true},
  };
  return shapes;
}

const StepShape* shape_of(std::string_view name) {
  for (const auto& s : step_shapes()) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

// Resolves {"field": name, "index": i} against a fixed frame kind.
Result<std::size_t> tamper_offset(const Json& t, std::string_view kind) {
  if (!t.contains("field")) return t.value("offset", std::size_t{0});
  if (auto k = frame_kind(kind)) {
    auto off = wire::field_offset(*k, t.at("field").get<std::string>());
    if (off != std::string::npos) return off + t.value("index", std::size_t{0});
  }
  return make_error(Errc::ScriptError, "field tamper needs a fixed frame kind with that field");
}

bool expectation_met(const Json& expect, const std::string& verdict) {
  if (expect.is_string()) return expect.get<std::string>() == verdict;
  if (expect.is_array()) {
    return std::any_of(expect.begin(), expect.end(),
                       [&](const Json& e) { return e.is_string() && e.get<std::string>() == verdict; });
  }
  return false;
}

}  // namespace

bool is_simulation_only(std::string_view step) {
  auto* s = shape_of(step);
  return s && s->sim_only;
}

Result<Scenario> Scenario::parse(const Json& j) {
  try {
    Scenario s;
    s.name = j.value("name", "unnamed");
    s.description = j.value("description", "");
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    s.fleet = j.value("fleet", Json::object());
    if (!j.contains("steps") || !j.at("steps").is_array()) {
      return make_error(Errc::ScriptError, "scenario needs a steps array");
    }
    std::size_t i = 0;
    for (const auto& step : j.at("steps")) {
      auto where = "step " + std::to_string(i++);
      if (!step.is_object() || !step.contains("do") || !step.at("do").is_string()) {
        return make_error(Errc::ScriptError, where + ": needs a \"do\" string");
      }
      auto name = step.at("do").get<std::string>();
      auto* shape = shape_of(name);
      if (!shape) return make_error(Errc::ScriptError, where + ": unknown step '" + name + "'");
      for (auto key : shape->required) {
        if (!step.contains(key)) {
          return make_error(Errc::ScriptError, where + " (" + name + "): missing '" + std::string(key) + "'");
        }
      }
      if (step.contains("expect") && !step.at("expect").is_string() && !step.at("expect").is_array()) {
        return make_error(Errc::ScriptError, where + ": expect must be a string or a list");
      }
      s.steps.push_back(step);
    }
    return s;
  } catch (const Json::exception& e) {
    return make_error(Errc::ScriptError, std::string("scenario: ") + e.what());
  }
}

Result<Scenario> Scenario::load(const std::filesystem::path& path) {
  KESIC_TRY(j, read_json_file(path));
  return parse(j);
}

Json Scenario::to_json() const {
  Json j{{"name", name}, {"description", description}};
  if (seed) j["seed"] = *seed;
  j["fleet"] = fleet;
  j["steps"] = steps;
  return j;
}

bool Scenario::needs_simulation() const {
  return std::any_of(steps.begin(), steps.end(), [](const Json& s) {
    return is_simulation_only(s.at("do").get<std::string>());
  });
}

// ---------------------------------------------------------------- runner

struct Runner::ClientState {
  ClientState(const client::ClientConfig& cfg, const Clock& base, Seconds offset,
              std::unique_ptr<RandomSource> r, Backend& b, const std::string& name)
      : clock(base, offset),
        rng(std::move(r)),
        sdk(cfg, cache, clock, *rng, b.kdc_link(name), b.isv_link(name), b.device_link(name)) {}

  client::CredentialCache cache;
  OffsetClock clock;
  std::unique_ptr<RandomSource> rng;
  client::Client sdk;
  std::map<std::string, client::DeviceEntry> consumed;  // last Dev_pc entry spent per device
};

Runner::Runner(const Fleet& fleet, Backend& backend, RunOptions options)
    : fleet_(fleet), backend_(backend), options_(options) {}

Runner::~Runner() = default;

Runner::ClientState& Runner::client(const std::string& name) {
  auto& slot = clients_[name];
  if (!slot) {
    const auto* spec = fleet_.client_spec(name);
    slot = std::make_unique<ClientState>(fleet_.clients.at(name), backend_.clock(),
                                         spec ? spec->clock_offset : 0,
                                         make_random(options_.seed, "client:" + name), backend_, name);
  }
  return *slot;
}

void Runner::harvest() {
  auto add = [this](std::string label, const crypto::SymmetricKey& k) {
    Bytes b(k.bytes().begin(), k.bytes().end());
    for (const auto& s : session_secrets_) {
      if (s.bytes == b) return;
    }
    session_secrets_.push_back({std::move(label), std::move(b)});
  };
  for (const auto& [name, c] : clients_) {
    if (c->cache.tgt) add(name + " K_C-TGS", c->cache.tgt->session_key);
    for (const auto& [id, svc] : c->cache.services) add(name + " K_C-" + id, svc.session_key);
    for (const auto& [dev, e] : c->cache.devices) add(name + " K_C-" + dev, e.session_key);
  }
}

Json Runner::run(const Scenario& scenario) {
  Json steps = Json::array();
  Json first_failure = nullptr;
  for (std::size_t i = 0; i < scenario.steps.size(); ++i) {
    const Json& step = scenario.steps[i];
    StepOutcome out;
    try {
      out = execute(step);
    } catch (const std::exception& e) {
      out = outcome_of(make_error(Errc::ScriptError, e.what()));
    }
    harvest();

    bool pass = true;
    std::vector<std::string> why;
    if (step.contains("expect") && !expectation_met(step.at("expect"), out.verdict)) {
      pass = false;
      why.push_back("expected " + step.at("expect").dump() + ", got \"" + out.verdict + "\"");
    }
    if (step.contains("expect_reason")) {
      auto want = step.at("expect_reason").get<std::string>();
      if (out.detail.find(want) == std::string::npos) {
        pass = false;
        why.push_back("reason \"" + out.detail + "\" lacks \"" + want + "\"");
      }
    }
    if (step.contains("expect_data")) {
      for (const auto& [k, v] : step.at("expect_data").items()) {
        if (!out.data.contains(k) || out.data.at(k) != v) {
          pass = false;
          why.push_back(k + ": expected " + v.dump() + ", got " +
                        (out.data.contains(k) ? out.data.at(k).dump() : "nothing"));
        }
      }
    }
    // A check without an explicit expectation must hold.
    if (step.at("do") == "check" && !step.contains("expect") && out.verdict != "ok") {
      pass = false;
      why.push_back("check failed: " + out.detail);
    }
    // Unexpected script errors always fail, expectation or not.
    if (out.verdict == to_string(Errc::ScriptError) && !step.contains("expect")) {
      pass = false;
      why.push_back("script error: " + out.detail);
    }

    Json entry{{"index", i}, {"step", step}, {"verdict", out.verdict}};
    if (!out.detail.empty()) entry["detail"] = out.detail;
    if (!out.data.empty()) entry["data"] = out.data;
    entry["pass"] = pass;
    if (!pass) {
      std::string msg;
      for (const auto& w : why) msg += (msg.empty() ? "" : "; ") + w;
      entry["failure"] = msg;
      if (first_failure.is_null()) {
        first_failure = Json{{"index", i}, {"do", step.at("do")}, {"failure", msg}};
      }
    }
    steps.push_back(std::move(entry));
  }

  std::vector<Secret> secrets = fleet_.secrets;
  secrets.insert(secrets.end(), session_secrets_.begin(), session_secrets_.end());
  auto leaks = scan_for_secrets(secrets, backend_.transcript());
  Json leak_j = Json::array();
  for (const auto& l : leaks) leak_j.push_back(l.to_json());
  if (!leaks.empty() && first_failure.is_null()) {
    first_failure = Json{{"index", nullptr}, {"do", "confidentiality"},
                         {"failure", "secret bytes on the wire: " + leaks.front().secret}};
  }

  Json report{{"scenario", scenario.name},
              {"description", scenario.description},
              {"mode", std::string(backend_.mode())},
              {"seed", options_.seed},
              {"steps", steps}};
  if (options_.include_transcript) {
    Json t = Json::array();
    for (const auto& p : backend_.transcript()) t.push_back(p.to_json());
    report["transcript"] = std::move(t);
  }
  report["confidentiality"] = Json{{"secrets_checked", secrets.size()},
                                   {"frames_scanned", backend_.transcript().size()},
                                   {"leaks", leak_j}};
  report["passed"] = first_failure.is_null();
  report["first_failure"] = first_failure;
  return report;
}

StepOutcome Runner::execute(const Json& step) {
  const auto name = step.at("do").get<std::string>();
  if (is_simulation_only(name) && !backend_.sim()) {
    return outcome_of(make_error(Errc::ScriptError, name + " needs simulated mode"));
  }
  auto str = [&](const char* key) { return step.at(key).get<std::string>(); };
  auto check_device = [&]() -> std::optional<StepOutcome> {
    if (!fleet_.device(str("device"))) {
      return outcome_of(make_error(Errc::ScriptError, "unknown device " + str("device")));
    }
    return std::nullopt;
  };
  auto check_client = [&]() -> std::optional<StepOutcome> {
    if (!fleet_.clients.count(str("client"))) {
      return outcome_of(make_error(Errc::ScriptError, "unknown client " + str("client")));
    }
    return std::nullopt;
  };

  if (name == "advance") return backend_.advance(step.at("seconds").get<Seconds>());
  if (name == "stop_isv") return backend_.stop_isv();
  if (name == "restart_isv") return backend_.restart_isv();
  if (name == "boot") {
    if (auto e = check_device()) return *e;
    return backend_.boot(str("device"));
  }
  if (name == "retransmit") {
    if (auto e = check_device()) return *e;
    return backend_.retransmit(str("device"));
  }
  if (name == "sleep") {
    if (auto e = check_device()) return *e;
    return backend_.sleep(str("device"));
  }
  if (name == "mutate_memory") {
    if (auto e = check_device()) return *e;
    return backend_.mutate(str("device"), step.at("offset").get<std::size_t>(),
                           static_cast<std::uint8_t>(step.value("xor", 1)));
  }
  if (name == "check") {
    if (auto e = check_device()) return *e;
    return do_check(step);
  }
  if (name == "login") {
    if (auto e = check_client()) return *e;
    auto password = step.value("password", fleet_.client_spec(str("client"))->password);
    auto& c = client(str("client"));
    auto out = outcome_of(c.sdk.login(password));
    out.data = Json{{"tgt_cached", c.cache.tgt.has_value()}};
    return out;
  }
  if (name == "ticket") {
    if (auto e = check_client()) return *e;
    auto r = client(str("client")).sdk.get_iot_ticket(str("device"));
    if (!r) return outcome_of(r.error());
    StepOutcome out{"ok"};
    out.data = Json{{"type", std::string(wire::to_string(r->type))}, {"nonce", r->nonce}};
    return out;
  }
  if (name == "call") {
    if (auto e = check_client()) return *e;
    return do_call(step);
  }
  if (name == "attest") {
    if (auto e = check_client()) return *e;
    if (auto e = check_device()) return *e;
    return do_attest(step);
  }
  if (name == "forge_tgs") {
    if (auto e = check_client()) return *e;
    return do_forge_tgs(step);
  }
  if (name == "adversary") {
    Json h = step;
    if (h.contains("field")) {
      auto off = tamper_offset(h, h.value("kind", "*"));
      if (!off) return outcome_of(off.error());
      h["offset"] = *off;
    }
    auto hook = LinkHook::from_json(h);
    if (!hook) return outcome_of(hook.error());
    backend_.sim()->net().add_hook(*hook);
    return StepOutcome{"ok"};
  }
  if (name == "clear_adversary") {
    backend_.sim()->net().clear_hooks();
    return StepOutcome{"ok"};
  }
  if (name == "replay") return do_replay(step);
  if (name == "inject") return do_inject(step);
  return outcome_of(make_error(Errc::ScriptError, "unhandled step " + name));
}

StepOutcome Runner::do_call(const Json& step) {
  auto& c = client(step.at("client").get<std::string>());
  auto device = step.at("device").get<std::string>();
  auto cmd = wire::parse_command(step.at("cmd").get<std::string>());
  if (!cmd) return outcome_of(make_error(Errc::ScriptError, cmd.error().message()));

  Result<client::DeviceReply> r = make_error(Errc::ScriptError);
  if (step.value("reuse_consumed", false)) {
    auto it = c.consumed.find(device);
    if (it == c.consumed.end()) {
      return outcome_of(make_error(Errc::ScriptError, "no consumed entry for " + device));
    }
    r = c.sdk.present(device, it->second, *cmd);
  } else {
    std::optional<client::DeviceEntry> before;
    if (auto it = c.cache.devices.find(device); it != c.cache.devices.end()) before = it->second;
    r = c.sdk.call_device(device, *cmd, step.value("force", false));
    if (before && before->type == wire::DeviceType::power_constrained &&
        !c.cache.devices.count(device)) {
      c.consumed.insert_or_assign(device, *before);
    }
  }
  if (!r) return outcome_of(r.error());
  StepOutcome out{std::string(device::to_string(r->outcome)), r->text};
  out.data = Json{{"response", r->text}};
  return out;
}

StepOutcome Runner::do_attest(const Json& step) {
  auto& c = client(step.at("client").get<std::string>());
  auto device = step.at("device").get<std::string>();
  auto r = c.sdk.verify_attestation(device, fleet_.images.at(device), step.value("force", false));
  if (!r) {
    // The device's own verdict, not "compromised", when it refused to answer.
    if (r.code() == Errc::DeviceRejected) return StepOutcome{r.error().detail, "device rejected ATTEST"};
    return outcome_of(r.error());
  }
  StepOutcome out{r->healthy ? "healthy" : "compromised"};
  out.data = Json{{"report", r->report}};
  return out;
}

StepOutcome Runner::do_check(const Json& step) {
  auto status = backend_.device_status(step.at("device").get<std::string>());
  if (!status) return outcome_of(status.error());
  StepOutcome out{"ok"};
  out.data = *status;
  for (const auto& key : {"led", "synced", "awake", "co_sync", "window_base"}) {
    if (!step.contains(key)) continue;
    if (!status->contains(key) || status->at(key) != step.at(key)) {
      out.verdict = "mismatch";
      out.detail += std::string(out.detail.empty() ? "" : "; ") + key + " is " +
                    (status->contains(key) ? status->at(key).dump() : "absent");
    }
  }
  return out;
}

StepOutcome Runner::do_forge_tgs(const Json& step) {
  auto name = step.at("client").get<std::string>();
  auto& c = client(name);
  if (!c.cache.tgt) return outcome_of(make_error(Errc::ScriptError, name + " has no TGT"));
  // A legitimate user's TGT presented with somebody else's identity.
  krb::Authenticator auth{step.at("claim").get<std::string>(), fleet_.clients.at(name).ad_c,
                          c.clock.now(), ++c.cache.cusec};
  auto req = krb::build_tgs_request(*c.cache.tgt, step.value("service", "isv"), auth, *c.rng);
  auto reply = backend_.kdc_link(name).exchange(req);
  if (!reply) return outcome_of(reply.error());
  auto cred = krb::open_tgs_reply(*c.cache.tgt, *reply);
  return cred ? StepOutcome{"ok"} : outcome_of(cred.error());
}

StepOutcome Runner::do_replay(const Json& step) {
  auto& sim = *backend_.sim();
  auto kind = step.at("kind").get<std::string>();
  const Packet* original = sim.net().find(kind, step.value("from", "*"), step.value("to", "*"),
                                          step.value("nth", -1));
  if (!original) return outcome_of(make_error(Errc::ScriptError, "nothing recorded matches " + kind));
  const std::string recorded = original->payload;
  std::string payload = recorded;
  std::string from = step.value("as", original->from);
  std::string to = step.value("redirect", original->to);
  std::uint64_t orig_seq = original->seq;

  if (step.contains("tamper")) {
    const auto& t = step.at("tamper");
    auto off = tamper_offset(t, kind);
    if (!off) return outcome_of(off.error());
    if (payload.empty()) return outcome_of(make_error(Errc::ScriptError, "empty payload"));
    auto at = *off % payload.size();
    payload[at] = tamper_char(payload[at], static_cast<std::uint8_t>(t.value("xor", 1)), t.value("hex", false));
  }

  sim.inbox(from).clear();
  auto seq = sim.inject(from, to, std::move(payload));
  const Packet& p = sim.net().packet(seq);
  StepOutcome out{p.verdict.empty() ? p.fate : p.verdict, p.reason};
  out.data = Json{{"replayed_seq", orig_seq}, {"seq", seq}};

  if (step.contains("open_with_password")) {
    // The attacker tries to use what the KDC sent back.
    auto& box = sim.inbox(from);
    if (box.empty()) return outcome_of(make_error(Errc::Timeout, "no reply to the replay"));
    auto req = parse_json(recorded);
    std::string id_c = req ? req->value("id_c", "") : "";
    auto pk = crypto::derive_password_key(step.at("open_with_password").get<std::string>(), as_bytes(id_c));
    if (!pk) return outcome_of(pk.error());
    auto tgt = krb::open_as_reply(*pk, box.back());
    return tgt ? StepOutcome{"ok", "attacker opened the reply"} : outcome_of(tgt.error());
  }
  return out;
}

StepOutcome Runner::do_inject(const Json& step) {
  auto& sim = *backend_.sim();
  std::string payload;
  if (step.contains("hex")) {
    auto b = from_hex(step.at("hex").get<std::string>());
    if (!b) return outcome_of(make_error(Errc::ScriptError, "bad hex payload"));
    payload = to_string(*b);
  } else {
    payload = step.value("text", "");
  }
  auto seq = sim.inject(step.value("from", "attacker"), step.at("to").get<std::string>(), payload);
  const Packet& p = sim.net().packet(seq);
  return StepOutcome{p.verdict.empty() ? p.fate : p.verdict, p.reason};
}

}  // namespace kesic::harness
