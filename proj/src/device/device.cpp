#include "kesic/device/device.hpp"

#include <fstream>
#include <sstream>

namespace kesic::device {

using crypto::KeyRole;

// ---------------------------------------------------------------- profile

Result<DeviceProfile> DeviceProfile::from_json(const Json& j) {
  try {
    DeviceProfile p;
    p.name = j.at("name").get<std::string>();
    KESIC_TRY(id, wire::NumericId::parse(j.at("id").get<std::string>()));
    KESIC_TRY(isv_id, wire::NumericId::parse(j.at("isv_id").get<std::string>()));
    KESIC_TRY(type, wire::parse_device_type(j.value("type", "general")));
    p.rot.id = id;
    p.rot.isv_id = isv_id;
    p.rot.type = type;
    p.rot.window = j.value("window", 16u);
    p.rot.freshness_window = j.value("freshness_window", Seconds{300});
    p.rot.seal_responses = j.value("seal_responses", false);
    if (p.rot.window == 0 || p.rot.window > RootOfTrust::kMaxWindow) {
      return make_error(Errc::ParseError, "window must be in 1..64");
    }
    p.kl_sync_hex = j.at("kl_sync").get<std::string>();
    p.kl_tkt_hex = j.at("kl_tkt").get<std::string>();
    p.kl_key_hex = j.at("kl_key").get<std::string>();
    p.counter_file = j.value("counter_file", "");
    p.memory_image = j.value("memory_image", "");
    return p;
  } catch (const Json::exception& e) {
    return make_error(Errc::ParseError, std::string("device profile: ") + e.what());
  }
}

Result<DeviceProfile> DeviceProfile::load(const std::filesystem::path& path) {
  KESIC_TRY(j, read_json_file(path));
  KESIC_TRY(p, from_json(j));
  // Relative paths are relative to the profile.
  auto dir = path.parent_path();
  if (!p.counter_file.empty() && p.counter_file.is_relative()) p.counter_file = dir / p.counter_file;
  if (!p.memory_image.empty() && p.memory_image.is_relative()) p.memory_image = dir / p.memory_image;
  return p;
}

Json DeviceProfile::to_json() const {
  return Json{{"name", name},
              {"id", rot.id.render()},
              {"type", std::string(wire::to_string(rot.type))},
              {"isv_id", rot.isv_id.render()},
              {"kl_sync", kl_sync_hex},
              {"kl_tkt", kl_tkt_hex},
              {"kl_key", kl_key_hex},
              {"window", rot.window},
              {"freshness_window", rot.freshness_window},
              {"seal_responses", rot.seal_responses},
              {"counter_file", counter_file.string()},
              {"memory_image", memory_image.string()}};
}

Bytes default_memory_image(std::string_view device_name, std::size_t size) {
  // Counter-mode SHA-256 over the name: stable across runs and platforms.
  Bytes out;
  out.reserve(size);
  for (std::uint32_t block = 0; out.size() < size; ++block) {
    std::string seed = "firmware:" + std::string(device_name) + ":" + std::to_string(block);
    auto d = crypto::sha256(as_bytes(seed));
    for (auto b : d) {
      if (out.size() == size) break;
      out.push_back(b);
    }
  }
  return out;
}

// ---------------------------------------------------------------- device

namespace {

RotKeys keys_from(const DeviceProfile& p) {
  auto key = [](const std::string& hex, KeyRole role) {
    auto k = SymmetricKey::from_hex(hex, role);
    if (!k) throw std::invalid_argument("device profile key: " + k.error().message());
    return *k;
  };
  return RotKeys{key(p.kl_sync_hex, KeyRole::lt_sync), key(p.kl_tkt_hex, KeyRole::lt_ticket),
                 key(p.kl_key_hex, KeyRole::lt_sesskey)};
}

}  // namespace

IotDevice::IotDevice(const DeviceProfile& profile, std::unique_ptr<CounterStore> counter,
                     Bytes memory, const Clock& timer, RandomSource& rng)
    : name_(profile.name),
      type_(profile.rot.type),
      id_(profile.rot.id),
      counter_(std::move(counter)),
      memory_(std::move(memory)),
      rot_(profile.rot, keys_from(profile), *counter_, timer, rng) {}

Result<std::string> IotDevice::start_sync() {
  if (!awake_) return make_error(Errc::DeviceAsleep, name_ + " is asleep");
  rot_.power_cycle();
  return rot_.begin_sync();
}

std::string IotDevice::actuate(wire::Command cmd) {
  if (cmd == wire::Command::led_on) led_ = true;
  if (cmd == wire::Command::led_off) led_ = false;
  return std::string(wire::command_name(cmd));
}

DeviceEvent IotDevice::on_datagram(std::string_view payload) {
  if (control_ && payload.substr(0, 4) == "CTL ") return control(payload);
  if (!awake_) return DeviceEvent{"ignored", make_error(Errc::DeviceAsleep, "asleep")};

  auto act = [this](wire::Command c) { return actuate(c); };
  const bool pc = type_ == wire::DeviceType::power_constrained;
  switch (payload.size()) {
    case 136: {
      auto st = rot_.accept_sync_response(payload);
      return DeviceEvent{"sync_response", st};
    }
    case 104: {
      if (!pc) break;
      auto report = rot_.answer_attest_request(payload, memory_);
      if (!report) return DeviceEvent{"attest_request", report.error()};
      return DeviceEvent{"attest_request", ok_status(), std::nullopt, *report, ReplyTo::isv_attest};
    }
    case 208: {
      if (pc) break;
      auto v = rot_.serve_g(payload, memory_, act);
      return DeviceEvent{"service_request_g", ok_status(), v, v.response};
    }
    case 112: {
      if (!pc) break;
      auto v = rot_.serve_pc(payload, act);
      return DeviceEvent{"service_request_pc", ok_status(), v, v.response};
    }
    default:
      break;
  }
  // Unknown shapes get the generic error and nothing else.
  ServiceVerdict v{Outcome::invalid_request, "unexpected frame length",
                   std::string(response_text(Outcome::invalid_request))};
  return DeviceEvent{"unknown", make_error(Errc::LengthMismatch, std::to_string(payload.size())),
                     v, v.response};
}

DeviceEvent IotDevice::control(std::string_view payload) {
  std::istringstream in{std::string(payload.substr(4))};
  std::string verb;
  in >> verb;
  if (verb == "MUTATE") {
    std::size_t offset = 0;
    unsigned mask = 0;
    if (in >> offset >> mask) mutate_memory(offset, static_cast<std::uint8_t>(mask));
  } else if (verb == "SLEEP") {
    sleep();
  } else if (verb == "WAKE") {
    wake();
  } else if (verb != "STATUS") {
    return DeviceEvent{"control", make_error(Errc::InvalidArgument, "unknown control verb")};
  }
  return DeviceEvent{"control", ok_status(), std::nullopt, status().dump()};
}

void IotDevice::sleep() {
  awake_ = false;
  rot_.power_cycle();
}

void IotDevice::wake() { awake_ = true; }

void IotDevice::reboot() {
  led_ = false;
  rot_.power_cycle();
}

void IotDevice::mutate_memory(std::size_t offset, std::uint8_t xor_mask) {
  if (memory_.empty()) return;
  memory_[offset % memory_.size()] ^= xor_mask;
}

Json IotDevice::status() const {
  Json j{{"name", name_}, {"awake", awake_}, {"synced", synced()}, {"led", led_},
         {"co_sync", co_sync()}};
  if (auto w = window()) j["window_base"] = w->first;
  if (auto t = local_time()) j["local_time"] = *t;
  return j;
}

}  // namespace kesic::device
