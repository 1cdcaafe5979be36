#include "kesic/harness/transport.hpp"

#include <algorithm>
#include <cstdio>

#include "kesic/wire/frames.hpp"

namespace kesic::harness {

namespace {

constexpr std::string_view kActions[] = {"drop", "delay", "duplicate", "tamper"};

constexpr std::pair<wire::FrameKind, std::string_view> kKindNames[] = {
    {wire::FrameKind::sync_request, "sync_request"},
    {wire::FrameKind::sync_response, "sync_response"},
    {wire::FrameKind::attest_request, "attest_request"},
    {wire::FrameKind::attest_response, "attest_response"},
    {wire::FrameKind::service_request_g, "service_request_g"},
    {wire::FrameKind::service_request_pc, "service_request_pc"},
};

std::string json_type(std::string_view payload, std::string_view fallback) {
  auto j = parse_json(payload);
  if (j && j->is_object() && j->contains("type") && j->at("type").is_string()) {
    return j->at("type").get<std::string>();
  }
  return std::string(fallback);
}

}  // namespace

std::string_view packet_kind(wire::FrameKind kind) {
  for (const auto& [k, n] : kKindNames) {
    if (k == kind) return n;
  }
  return "raw";
}

std::optional<wire::FrameKind> frame_kind(std::string_view kind) {
  for (const auto& [k, n] : kKindNames) {
    if (n == kind) return k;
  }
  return std::nullopt;
}

bool glob_match(std::string_view pattern, std::string_view value) {
  if (pattern == "*") return true;
  if (!pattern.empty() && pattern.back() == '*') {
    return value.substr(0, pattern.size() - 1) == pattern.substr(0, pattern.size() - 1);
  }
  return pattern == value;
}

Result<LinkHook> LinkHook::from_json(const Json& j) {
  try {
    LinkHook h;
    auto action = j.at("action").get<std::string>();
    auto it = std::find(std::begin(kActions), std::end(kActions), action);
    if (it == std::end(kActions)) return make_error(Errc::ScriptError, "unknown action " + action);
    h.action = static_cast<Action>(it - std::begin(kActions));
    h.from = j.value("from", "*");
    h.to = j.value("to", "*");
    h.kind = j.value("kind", "*");
    h.probability = j.value("p", 1.0);
    h.delay = j.value("dt", Seconds{0});
    h.offset = j.value("offset", std::size_t{0});
    h.xor_mask = static_cast<std::uint8_t>(j.value("xor", 1));
    h.hex = j.value("hex", false);
    h.remaining = j.value("count", -1);
    if (h.probability < 0 || h.probability > 1) return make_error(Errc::ScriptError, "p outside [0,1]");
    if (h.action == Action::tamper && h.xor_mask == 0) return make_error(Errc::ScriptError, "xor 0");
    return h;
  } catch (const Json::exception& e) {
    return make_error(Errc::ScriptError, std::string("adversary: ") + e.what());
  }
}

Json LinkHook::to_json() const {
  Json j{{"action", std::string(kActions[static_cast<int>(action)])},
         {"from", from}, {"to", to}, {"kind", kind}, {"p", probability}};
  if (action == Action::delay) j["dt"] = delay;
  if (action == Action::tamper) {
    j["offset"] = offset;
    j["xor"] = xor_mask;
    if (hex) j["hex"] = true;
  }
  if (remaining >= 0) j["count"] = remaining;
  return j;
}

char tamper_char(char c, std::uint8_t mask, bool hex) {
  static constexpr std::string_view kDigits = "0123456789abcdef";
  auto at = kDigits.find(c);
  if (!hex || at == std::string_view::npos) return static_cast<char>(c ^ mask);
  auto flipped = (at ^ (mask & 0x0f)) == at ? at ^ 1 : at ^ (mask & 0x0f);
  return kDigits[flipped];
}

std::string classify(std::string_view from, std::string_view to, std::string_view payload) {
  if (payload.substr(0, 4) == "CTL ") return "control";
  if (to == "kdc") return json_type(payload, "kdc_request");
  if (from == "kdc") return json_type(payload, "kdc_reply");
  if (to == "isv:http") return "ticket_request";
  if (from == "isv:http") return "ticket_reply";
  auto fixed = [&](wire::FrameKind k) {
    return payload.size() == wire::frame_size(k) ? std::string(packet_kind(k)) : "raw";
  };
  if (to == "isv:sync") return fixed(wire::FrameKind::sync_request);
  if (to == "isv:attest") return fixed(wire::FrameKind::attest_response);
  if (to.substr(0, 7) == "client:" || to == "attacker") return "device_response";
  switch (payload.size()) {
    case 136: return "sync_response";
    case 104: return "attest_request";
    case 208: return "service_request_g";
    case 112: return "service_request_pc";
    default: return "raw";
  }
}

std::string eavesdrop_view(const Packet& p) {
  if (auto k = frame_kind(p.kind)) return wire::describe(*k, p.payload);
  return p.payload;
}

Json Packet::to_json() const {
  Json j{{"seq", seq},   {"t", sent_at},     {"from", from},
         {"to", to},     {"kind", kind},     {"size", payload.size()},
         {"fate", fate}, {"view", eavesdrop_view(*this)}};
  if (deliver_at != sent_at) j["deliver_at"] = deliver_at;
  if (!hooks.empty()) j["adversary"] = hooks;
  if (injected) j["injected"] = true;
  if (copy_of) j["copy_of"] = *copy_of;
  if (!verdict.empty()) j["verdict"] = verdict;
  if (!reason.empty()) j["reason"] = reason;
  return j;
}

VirtualTransport::VirtualTransport(const Clock& clock, std::uint64_t seed)
    : clock_(clock), rng_(make_random(seed, "transport")) {}

bool VirtualTransport::roll(double p) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  std::uint64_t v = 0;
  rng_->fill({reinterpret_cast<std::uint8_t*>(&v), sizeof v});
  return static_cast<double>(v >> 11) * 0x1.0p-53 < p;
}

std::uint64_t VirtualTransport::send(const std::string& from, const std::string& to,
                                     std::string payload, bool injected) {
  Packet p;
  p.seq = log_.size();
  p.sent_at = p.deliver_at = clock_.now();
  p.from = from;
  p.to = to;
  p.kind = classify(from, to, payload);
  p.payload = std::move(payload);
  p.injected = injected;

  bool dropped = false;
  int duplicates = 0;
  for (auto& h : hooks_) {
    if (h.remaining == 0 || !glob_match(h.from, from) || !glob_match(h.to, to) ||
        !glob_match(h.kind, p.kind) || !roll(h.probability)) {
      continue;
    }
    if (h.remaining > 0) --h.remaining;
    switch (h.action) {
      case LinkHook::Action::drop:
        dropped = true;
        p.hooks.push_back("drop");
        break;
      case LinkHook::Action::delay:
        p.deliver_at += h.delay;
        p.hooks.push_back("delay " + std::to_string(h.delay) + "s");
        break;
      case LinkHook::Action::duplicate:
        ++duplicates;
        p.hooks.push_back("duplicate");
        break;
      case LinkHook::Action::tamper: {
        if (p.payload.empty()) break;
        std::size_t at = h.offset % p.payload.size();
        p.payload[at] = tamper_char(p.payload[at], h.xor_mask, h.hex);
        char note[48];
        std::snprintf(note, sizeof note, "tamper %zu^0x%02x", at, h.xor_mask);
        p.hooks.push_back(note);
        break;
      }
    }
    if (dropped) break;
  }

  std::uint64_t seq = p.seq;
  if (dropped) {
    p.fate = "dropped";
    log_.push_back(std::move(p));
    return seq;
  }
  Packet copy = p;
  log_.push_back(std::move(p));
  queue_.push_back(seq);
  for (int i = 0; i < duplicates; ++i) {
    Packet d = copy;
    d.seq = log_.size();
    d.copy_of = seq;
    d.hooks.clear();
    queue_.push_back(d.seq);
    log_.push_back(std::move(d));
  }
  return seq;
}

std::optional<std::uint64_t> VirtualTransport::next_ready() {
  auto now = clock_.now();
  auto best = queue_.end();
  for (auto it = queue_.begin(); it != queue_.end(); ++it) {
    const auto& p = log_[*it];
    if (p.deliver_at > now) continue;
    if (best == queue_.end() || std::pair(p.deliver_at, p.seq) <
                                    std::pair(log_[*best].deliver_at, log_[*best].seq)) {
      best = it;
    }
  }
  if (best == queue_.end()) return std::nullopt;
  auto seq = *best;
  queue_.erase(best);
  log_[seq].fate = "delivered";
  return seq;
}

const Packet* VirtualTransport::find(std::string_view kind, std::string_view from,
                                     std::string_view to, int nth) const {
  std::vector<const Packet*> hits;
  for (const auto& p : log_) {
    if (glob_match(kind, p.kind) && glob_match(from, p.from) && glob_match(to, p.to)) {
      hits.push_back(&p);
    }
  }
  int idx = nth < 0 ? static_cast<int>(hits.size()) + nth : nth;
  if (idx < 0 || idx >= static_cast<int>(hits.size())) return nullptr;
  return hits[static_cast<std::size_t>(idx)];
}

}  // namespace kesic::harness
