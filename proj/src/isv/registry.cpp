#include "kesic/isv/registry.hpp"

namespace kesic::isv {

using crypto::KeyRole;

namespace {

Result<SymmetricKey> hex_key(const Json& j, const char* name, KeyRole role) {
  if (!j.contains(name) || !j.at(name).is_string()) {
    return make_error(Errc::ParseError, std::string("missing key ") + name);
  }
  return SymmetricKey::from_hex(j.at(name).get<std::string>(), role);
}

Result<DeviceRecord> parse_device(const Json& d) {
  KESIC_TRY(id, wire::NumericId::parse(d.at("id").get<std::string>()));
  KESIC_TRY(type, parse_device_type(d.value("type", "general")));
  KESIC_TRY(kl_sync, hex_key(d, "kl_sync", KeyRole::lt_sync));
  KESIC_TRY(kl_tkt, hex_key(d, "kl_tkt", KeyRole::lt_ticket));
  KESIC_TRY(kl_key, hex_key(d, "kl_key", KeyRole::lt_sesskey));
  DeviceRecord rec{d.at("name").get<std::string>(), id, type, DeviceKeys{kl_sync, kl_tkt, kl_key},
                   {}};
  for (const auto& c : d.value("allow", Json::array())) rec.allow_list.insert(c.get<std::string>());
  rec.window = d.value("window", 16u);
  if (rec.window == 0 || rec.window > 64) {
    return make_error(Errc::ParseError, "window must be in 1..64");
  }
  if (type == DeviceType::power_constrained) {
    KESIC_TRY(ref, from_hex(d.at("reference_sha256").get<std::string>()));
    if (ref.size() != rec.reference_hash.size()) {
      return make_error(Errc::ParseError, "reference_sha256 must be 32 bytes");
    }
    std::copy(ref.begin(), ref.end(), rec.reference_hash.begin());
  }
  return rec;
}

}  // namespace

Result<Registry> Registry::from_json(const Json& j) {
  try {
    const auto& isv = j.at("isv");
    KESIC_TRY(isv_id, wire::NumericId::parse(isv.at("id").get<std::string>()));
    KESIC_TRY(service_key, hex_key(isv, "service_key", KeyRole::service));
    Registry reg(IsvIdentity{isv_id, isv.value("service_id", "isv"), service_key});

    const Json clients = j.value("clients", Json::object());
    for (const auto& [name, id] : clients.items()) {
      KESIC_TRY(nid, wire::NumericId::parse(id.get<std::string>()));
      reg.clients_.emplace(name, nid);
    }
    for (const auto& d : j.value("devices", Json::array())) {
      KESIC_TRY(rec, parse_device(d));
      if (reg.devices_.count(rec.id) || reg.device_names_.count(rec.name)) {
        return make_error(Errc::ParseError, "duplicate device " + rec.name);
      }
      reg.device_names_.emplace(rec.name, rec.id);
      auto id = rec.id;
      reg.devices_.emplace(id, std::make_unique<Slot>(std::move(rec)));
    }
    return reg;
  } catch (const Json::exception& e) {
    return make_error(Errc::ParseError, std::string("device registry: ") + e.what());
  }
}

Result<Registry> Registry::load(const std::filesystem::path& path) {
  KESIC_TRY(j, read_json_file(path));
  return from_json(j);
}

std::optional<wire::NumericId> Registry::client_id(std::string_view name) const {
  auto it = clients_.find(name);
  if (it == clients_.end()) return std::nullopt;
  return it->second;
}

std::optional<wire::NumericId> Registry::device_id(std::string_view name) const {
  auto it = device_names_.find(name);
  if (it != device_names_.end()) return it->second;
  // Numeric ids are accepted too.
  auto parsed = wire::NumericId::parse(name);
  if (parsed && devices_.count(*parsed)) return *parsed;
  return std::nullopt;
}

std::vector<wire::NumericId> Registry::device_ids() const {
  std::vector<wire::NumericId> out;
  for (const auto& [id, slot] : devices_) out.push_back(id);
  return out;
}

Json Registry::snapshot() {
  Json out = Json::object();
  for (auto& [id, slot] : devices_) {
    std::lock_guard lock(slot->mu);
    out[id.render()] = {{"co_sync", slot->record.co_sync}, {"co_pc", slot->record.co_pc}};
  }
  return out;
}

Status Registry::restore(const Json& snap) {
  if (!snap.is_object()) return make_error(Errc::ParseError, "snapshot must be an object");
  for (auto& [id, slot] : devices_) {
    auto it = snap.find(id.render());
    if (it == snap.end()) continue;
    std::lock_guard lock(slot->mu);
    // Never move a counter backwards, whatever the file says.
    slot->record.co_sync = std::max(slot->record.co_sync, it->value("co_sync", std::uint64_t{0}));
    slot->record.co_pc = std::max(slot->record.co_pc, it->value("co_pc", std::uint64_t{0}));
  }
  return ok_status();
}

}  // namespace kesic::isv
