#include "kesic/harness/sim.hpp"

namespace kesic::harness {

namespace {

constexpr int kPumpLimit = 100000;

std::string verdict_of(const Status& st) {
  return st ? "ok" : std::string(to_string(st.code()));
}

}  // namespace

struct SimBackend::Links {
  struct Kdc final : client::KdcLink {
    Kdc(SimBackend& s, std::string a) : sim(s), addr(std::move(a)) {}
    Result<std::string> exchange(std::string_view request) override {
      return sim.request(addr, "kdc", std::string(request));
    }
    SimBackend& sim;
    std::string addr;
  };
  struct Isv final : client::IsvLink {
    Isv(SimBackend& s, std::string a) : sim(s), addr(std::move(a)) {}
    Result<client::HttpResponse> post_ticket(std::string_view authorization,
                                             std::string_view body) override {
      Json envelope{{"authorization", authorization}, {"body", body}};
      KESIC_TRY(raw, sim.request(addr, "isv:http", envelope.dump()));
      KESIC_TRY(j, parse_json(raw));
      return client::HttpResponse{j.value("status", 0), j.value("body", "")};
    }
    SimBackend& sim;
    std::string addr;
  };
  struct Device final : client::DeviceLink {
    Device(SimBackend& s, std::string a) : sim(s), addr(std::move(a)) {}
    Result<std::string> send(const std::string& device, std::string_view frame) override {
      return sim.request(addr, device, std::string(frame));
    }
    SimBackend& sim;
    std::string addr;
  };

  Links(SimBackend& s, const std::string& addr) : kdc(s, addr), isv(s, addr), device(s, addr) {}
  Kdc kdc;
  Isv isv;
  Device device;
};

SimBackend::SimBackend(const Fleet& fleet, std::uint64_t seed)
    : fleet_(fleet),
      seed_(seed),
      clock_(fleet.spec.start_time),
      net_(clock_, seed),
      kdc_rng_(make_random(seed, "kdc")),
      isv_rng_(make_random(seed, "isv")) {
  auto db = kdc::PrincipalDb::from_json(fleet.kdc_db);
  if (!db) throw std::invalid_argument("fleet KDC database: " + db.error().message());
  kdc_ = std::make_unique<kdc::Kdc>(*db, kdc::KdcConfig{}, clock_, *kdc_rng_);
  if (auto st = start_isv(); !st) throw std::invalid_argument("fleet registry: " + st.error().message());

  for (const auto& p : fleet.devices) {
    auto& rng = device_rngs_[p.name] = make_random(seed, "device:" + p.name);
    devices_[p.name] = std::make_unique<device::IotDevice>(
        p, std::make_unique<device::MemoryCounterStore>(), fleet.images.at(p.name), clock_, *rng);
    // Power-constrained devices start asleep; the script wakes them.
    if (p.rot.type == wire::DeviceType::power_constrained) devices_[p.name]->sleep();
  }
}

SimBackend::~SimBackend() = default;

Status SimBackend::start_isv() {
  KESIC_TRY(reg, isv::Registry::from_json(fleet_.registry));
  isv::IsvConfig cfg;
  cfg.iot_ticket_lifetime = fleet_.spec.iot_ticket_lifetime;
  cfg.awake_period = fleet_.spec.awake_period;
  cfg.attest_timeout = fleet_.spec.attest_timeout;
  isv_ = std::make_unique<isv::Isv>(std::move(reg), cfg, clock_, *isv_rng_);
  if (isv_snapshot_) KESIC_CHECK(isv_->registry().restore(*isv_snapshot_));
  return ok_status();
}

StepOutcome SimBackend::advance(Seconds dt) {
  if (dt < 0) return outcome_of(make_error(Errc::ScriptError, "the clock only moves forward"));
  clock_.advance(dt);
  StepOutcome out{"ok"};
  Json verdicts = Json::array();
  for (auto seq : pump()) {  // delayed packets may now be due
    if (!net_.packet(seq).verdict.empty()) verdicts.push_back(net_.packet(seq).verdict);
  }
  out.data = Json{{"now", clock_.now()}, {"verdicts", verdicts}};
  return out;
}

device::IotDevice* SimBackend::device(const std::string& name) {
  auto it = devices_.find(name);
  return it == devices_.end() ? nullptr : it->second.get();
}

std::uint64_t SimBackend::inject(const std::string& from, const std::string& to,
                                 std::string payload) {
  auto seq = net_.send(from, to, std::move(payload), /*injected=*/true);
  pump();
  return seq;
}

std::vector<std::uint64_t> SimBackend::pump() {
  std::vector<std::uint64_t> handled;
  for (int i = 0; i < kPumpLimit; ++i) {
    auto seq = net_.next_ready();
    if (!seq) break;
    dispatch(*seq);
    handled.push_back(*seq);
  }
  return handled;
}

Result<std::string> SimBackend::request(const std::string& from, const std::string& to,
                                        std::string payload) {
  auto& box = inboxes_[from];
  box.clear();
  auto seq = net_.send(from, to, std::move(payload));
  pump();
  if (!box.empty()) {
    auto reply = std::move(box.front());
    box.pop_front();
    return reply;
  }
  if (net_.packet(seq).fate == "unreachable") return make_error(Errc::TransportError, to + " is down");
  return make_error(Errc::Timeout, "no reply from " + to);
}

void SimBackend::dispatch(std::uint64_t seq) {
  // Copies: sending below may grow the log.
  const std::string from = net_.packet(seq).from;
  const std::string to = net_.packet(seq).to;
  const std::string payload = net_.packet(seq).payload;
  auto mark = [&](std::string verdict, std::string reason = {}) {
    auto& p = net_.packet(seq);
    p.verdict = std::move(verdict);
    p.reason = std::move(reason);
  };
  auto mark_status = [&](const Status& st) {
    mark(verdict_of(st), st ? "" : st.error().detail);
  };

  if (to.rfind("client:", 0) == 0 || to == "attacker") {
    inboxes_[to].push_back(payload);
    return;
  }
  if (to == "kdc") {
    auto r = kdc_->handle(payload);
    mark_status(r.status);
    net_.send("kdc", from, r.body);
    return;
  }
  if (to.rfind("isv:", 0) == 0) {
    if (!isv_) {
      net_.packet(seq).fate = "unreachable";
      return;
    }
    if (to == "isv:http") {
      auto env = parse_json(payload);
      if (!env || !env->is_object()) {
        mark("ParseError", "not an HTTP envelope");
        net_.send("isv:http", from, Json{{"status", 400}, {"body", ""}}.dump());
        return;
      }
      auto r = isv_->handle_ticket(env->value("authorization", ""), env->value("body", ""));
      mark_status(r.status);
      net_.send("isv:http", from, Json{{"status", r.http_status}, {"body", r.body}}.dump());
      return;
    }
    isv::SyncOutcome out;
    if (to == "isv:sync") {
      out = isv_->handle_sync_request(from, payload);
    } else if (to == "isv:attest") {
      out = isv_->handle_attest_response(from, payload);
    } else {
      net_.packet(seq).fate = "unreachable";
      return;
    }
    mark_status(out.status);
    if (out.reply) net_.send("isv:sync", out.reply->to, out.reply->payload);
    return;
  }
  auto* dev = device(to);
  if (!dev) {
    net_.packet(seq).fate = "unreachable";
    return;
  }
  auto ev = dev->on_datagram(payload);
  if (ev.verdict) {
    mark(std::string(device::to_string(ev.verdict->outcome)), ev.verdict->reason);
  } else {
    mark_status(ev.status);
  }
  if (ev.reply) {
    net_.send(to, ev.reply_to == device::ReplyTo::isv_attest ? "isv:attest" : from, *ev.reply);
  }
}

StepOutcome SimBackend::sync_outcome(const std::string& name, std::size_t first_seq) {
  auto* dev = device(name);
  StepOutcome out;
  out.data = dev->status();
  if (dev->synced()) {
    out.verdict = "ok";
    return out;
  }
  // Report the last rejection anywhere along the exchange; silence is a
  // timeout from the device's point of view.
  const auto& log = net_.log();
  for (std::size_t i = log.size(); i-- > first_seq;) {
    if (!log[i].verdict.empty() && log[i].verdict != "ok") {
      out.verdict = log[i].verdict;
      out.detail = log[i].reason;
      return out;
    }
  }
  out.verdict = std::string(to_string(Errc::Timeout));
  out.detail = "no synchronization response";
  return out;
}

StepOutcome SimBackend::boot(const std::string& name) {
  auto* dev = device(name);
  if (!dev) return outcome_of(make_error(Errc::ScriptError, "unknown device " + name));
  dev->wake();
  auto first = net_.log().size();
  auto frame = dev->start_sync();
  if (!frame) return outcome_of(frame.error());
  net_.send(name, "isv:sync", *frame);
  pump();
  return sync_outcome(name, first);
}

StepOutcome SimBackend::retransmit(const std::string& name) {
  auto* dev = device(name);
  if (!dev) return outcome_of(make_error(Errc::ScriptError, "unknown device " + name));
  auto first = net_.log().size();
  auto frame = dev->retransmit_sync();
  if (!frame) return outcome_of(frame.error());
  net_.send(name, "isv:sync", *frame);
  pump();
  return sync_outcome(name, first);
}

StepOutcome SimBackend::sleep(const std::string& name) {
  auto* dev = device(name);
  if (!dev) return outcome_of(make_error(Errc::ScriptError, "unknown device " + name));
  dev->sleep();
  StepOutcome out{"ok"};
  out.data = dev->status();
  return out;
}

StepOutcome SimBackend::mutate(const std::string& name, std::size_t offset, std::uint8_t mask) {
  auto* dev = device(name);
  if (!dev) return outcome_of(make_error(Errc::ScriptError, "unknown device " + name));
  dev->mutate_memory(offset, mask);
  return StepOutcome{"ok"};
}

Result<Json> SimBackend::device_status(const std::string& name) {
  auto* dev = device(name);
  if (!dev) return make_error(Errc::ScriptError, "unknown device " + name);
  return dev->status();
}

StepOutcome SimBackend::stop_isv() {
  if (!isv_) return outcome_of(make_error(Errc::ScriptError, "ISV already stopped"));
  isv_snapshot_ = isv_->registry().snapshot();
  isv_.reset();
  return StepOutcome{"ok"};
}

StepOutcome SimBackend::restart_isv() {
  if (isv_) return outcome_of(make_error(Errc::ScriptError, "ISV is running"));
  StepOutcome out = outcome_of(start_isv());
  if (isv_) out.data = isv_->registry().snapshot();
  return out;
}

client::KdcLink& SimBackend::kdc_link(const std::string& client) {
  auto& l = links_[client];
  if (!l) l = std::make_unique<Links>(*this, "client:" + client);
  return l->kdc;
}

client::IsvLink& SimBackend::isv_link(const std::string& client) {
  kdc_link(client);
  return links_[client]->isv;
}

client::DeviceLink& SimBackend::device_link(const std::string& client) {
  kdc_link(client);
  return links_[client]->device;
}

}  // namespace kesic::harness
