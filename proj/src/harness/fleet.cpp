#include "kesic/harness/fleet.hpp"

#include <algorithm>

#include "kesic/kdc/kdc.hpp"

namespace kesic::harness {

using crypto::KeyRole;
using crypto::SymmetricKey;

FleetSpec FleetSpec::standard() {
  FleetSpec s;
  s.clients = {{"alice", "alice-pw", "10.0.0.2"},
               {"bob", "bob-pw", "10.0.0.3"},
               {"mallory", "mallory-pw", "10.0.0.66"}};
  s.devices = {{"lamp", wire::DeviceType::general, {"alice", "bob"}},
               {"sensor", wire::DeviceType::power_constrained, {"alice"}}};
  return s;
}

Result<FleetSpec> FleetSpec::from_json(const Json& j) {
  FleetSpec s = standard();
  try {
    s.start_time = j.value("start_time", s.start_time);
    if (j.contains("clients")) {
      s.clients.clear();
      for (const auto& c : j.at("clients")) {
        s.clients.push_back({c.at("name").get<std::string>(), c.at("password").get<std::string>(),
                             c.value("address", "10.0.0.2"), c.value("clock_offset", Seconds{0})});
      }
    }
    if (j.contains("devices")) {
      s.devices.clear();
      for (const auto& d : j.at("devices")) {
        DeviceSpec ds;
        ds.name = d.at("name").get<std::string>();
        KESIC_TRY(type, wire::parse_device_type(d.value("type", "general")));
        ds.type = type;
        ds.allow = d.value("allow", std::vector<std::string>{});
        ds.window = d.value("window", 16u);
        ds.freshness_window = d.value("freshness_window", Seconds{300});
        ds.seal_responses = d.value("seal_responses", false);
        s.devices.push_back(std::move(ds));
      }
    }
    // Per-device overrides without restating the whole list.
    const Json tweaks = j.value("device_overrides", Json::object());
    for (const auto& [name, o] : tweaks.items()) {
      auto it = std::find_if(s.devices.begin(), s.devices.end(),
                             [&](const DeviceSpec& d) { return d.name == name; });
      if (it == s.devices.end()) return make_error(Errc::ScriptError, "override for unknown device " + name);
      it->window = o.value("window", it->window);
      it->freshness_window = o.value("freshness_window", it->freshness_window);
      it->seal_responses = o.value("seal_responses", it->seal_responses);
      if (o.contains("allow")) it->allow = o.at("allow").get<std::vector<std::string>>();
    }
    const Json isv = j.value("isv", Json::object());
    s.iot_ticket_lifetime = isv.value("ticket_lifetime", s.iot_ticket_lifetime);
    s.awake_period = isv.value("awake_period", s.awake_period);
    s.attest_timeout = isv.value("attest_timeout", s.attest_timeout);
  } catch (const Json::exception& e) {
    return make_error(Errc::ScriptError, std::string("fleet: ") + e.what());
  }
  return s;
}

Json FleetSpec::to_json() const {
  Json clients_j = Json::array();
  for (const auto& c : clients) {
    clients_j.push_back({{"name", c.name}, {"password", c.password}, {"address", c.address},
                         {"clock_offset", c.clock_offset}});
  }
  Json devices_j = Json::array();
  for (const auto& d : devices) {
    devices_j.push_back({{"name", d.name},
                         {"type", std::string(wire::to_string(d.type))},
                         {"allow", d.allow},
                         {"window", d.window},
                         {"freshness_window", d.freshness_window},
                         {"seal_responses", d.seal_responses}});
  }
  return Json{{"start_time", start_time},
              {"clients", clients_j},
              {"devices", devices_j},
              {"isv", {{"ticket_lifetime", iot_ticket_lifetime},
                       {"awake_period", awake_period},
                       {"attest_timeout", attest_timeout}}}};
}

Result<Fleet> Fleet::provision(const FleetSpec& spec, std::uint64_t seed) {
  auto rng = make_random(seed, "fleet");
  Fleet f;
  f.spec = spec;
  auto key = [&](KeyRole role, std::string label) {
    auto k = SymmetricKey::generate(*rng, role);
    f.secrets.push_back({std::move(label), Bytes(k.bytes().begin(), k.bytes().end())});
    return k;
  };

  auto tgs_key = key(KeyRole::service, "tgs key");
  auto isv_key = key(KeyRole::service, "isv service key");
  kdc::PrincipalDb db(tgs_key);
  db.add_service("isv", isv_key);

  Json clients_j = Json::object();
  std::uint32_t next_client = 0x101;
  for (const auto& c : spec.clients) {
    KESIC_TRY(pk, crypto::derive_password_key(c.password, as_bytes(c.name)));
    db.add_client_key(c.name, pk, {"isv"});
    f.secrets.push_back({c.name + " password", to_bytes(c.password)});
    f.secrets.push_back({c.name + " password key", Bytes(pk.bytes().begin(), pk.bytes().end())});

    client::ClientConfig cfg;
    cfg.name = c.name;
    KESIC_TRY(id, wire::NumericId::make(next_client++));
    KESIC_TRY(ad, wire::Address::from_ipv4(c.address));
    cfg.id_c = id;
    cfg.ad_c = ad;
    clients_j[c.name] = id.render();
    f.clients.emplace(c.name, std::move(cfg));
  }
  f.kdc_db = db.to_json();

  KESIC_TRY(isv_id, wire::NumericId::parse(kIsvId));
  Json devices_j = Json::array();
  std::uint32_t next_device = 7;
  for (const auto& d : spec.devices) {
    device::DeviceProfile p;
    p.name = d.name;
    KESIC_TRY(id, wire::NumericId::make(next_device++));
    p.rot = device::RotConfig{d.type, id, isv_id, d.window, d.freshness_window, d.seal_responses};
    p.kl_sync_hex = key(KeyRole::lt_sync, d.name + " kl_sync").hex();
    p.kl_tkt_hex = key(KeyRole::lt_ticket, d.name + " kl_tkt").hex();
    p.kl_key_hex = key(KeyRole::lt_sesskey, d.name + " kl_key").hex();
    auto image = device::default_memory_image(d.name);
    Json rec{{"name", d.name},          {"id", id.render()},
             {"type", std::string(wire::to_string(d.type))},
             {"allow", d.allow},        {"kl_sync", p.kl_sync_hex},
             {"kl_tkt", p.kl_tkt_hex},  {"kl_key", p.kl_key_hex},
             {"window", d.window}};
    if (d.type == wire::DeviceType::power_constrained) {
      rec["reference_sha256"] = to_hex(crypto::sha256(image));
    }
    devices_j.push_back(std::move(rec));
    f.images.emplace(d.name, std::move(image));
    f.devices.push_back(std::move(p));
  }
  f.registry = Json{
      {"isv", {{"id", std::string(kIsvId)}, {"service_id", "isv"}, {"service_key", isv_key.hex()}}},
      {"clients", clients_j},
      {"devices", devices_j}};
  return f;
}

const device::DeviceProfile* Fleet::device(std::string_view name) const {
  for (const auto& d : devices) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

const ClientSpec* Fleet::client_spec(std::string_view name) const {
  for (const auto& c : spec.clients) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

Status Fleet::write(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir / "devices", ec);
  std::filesystem::create_directories(dir / "clients", ec);
  if (ec) return make_error(Errc::IoError, ec.message());

  KESIC_CHECK(write_file_atomic(dir / "kdc.json", kdc_db.dump(2) + "\n", true));
  KESIC_CHECK(write_file_atomic(dir / "isv.json", registry.dump(2) + "\n", true));
  KESIC_CHECK(write_file_atomic(dir / "fleet.json", spec.to_json().dump(2) + "\n", true));
  for (const auto& d : devices) {
    auto p = d;
    p.counter_file = d.name + ".co_sync";
    p.memory_image = d.name + ".img";
    KESIC_CHECK(write_file_atomic(dir / "devices" / (d.name + ".json"), p.to_json().dump(2) + "\n", true));
    KESIC_CHECK(write_file_atomic(dir / "devices" / (d.name + ".img"), to_string(images.at(d.name))));
  }
  for (const auto& [name, c] : clients) {
    Json j{{"name", c.name}, {"id", c.id_c.render()}, {"address", c.ad_c.dotted()}};
    KESIC_CHECK(write_file_atomic(dir / "clients" / (name + ".json"), j.dump(2) + "\n"));
  }
  return ok_status();
}

}  // namespace kesic::harness
