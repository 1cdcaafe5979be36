#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kesic/client/client.hpp"
#include "kesic/common/json_io.hpp"
#include "kesic/common/random.hpp"
#include "kesic/device/device.hpp"

namespace kesic::harness {

struct ClientSpec {
  std::string name;
  std::string password;
  std::string address;  // dotted IPv4, used as AD_c
  Seconds clock_offset = 0;
};

struct DeviceSpec {
  std::string name;
  wire::DeviceType type = wire::DeviceType::general;
  std::vector<std::string> allow;
  unsigned window = 16;
  Seconds freshness_window = 300;
  bool seal_responses = false;
};

// What to provision. JSON form (every key optional):
//   {"start_time": 1700000000,
//    "clients": [{"name": "alice", "password": "alice-pw", "address": "10.0.0.2"}],
//    "devices": [{"name": "lamp", "type": "general", "allow": ["alice"], "window": 16}],
//    "isv": {"ticket_lifetime": 600, "awake_period": 60, "attest_timeout": 5}}
struct FleetSpec {
  Timestamp start_time = 1'700'000'000;
  std::vector<ClientSpec> clients;
  std::vector<DeviceSpec> devices;
  Seconds iot_ticket_lifetime = 600;
  Seconds awake_period = 60;
  Seconds attest_timeout = 5;

  // alice, bob and mallory; lamp (general) and sensor (power-constrained).
  static FleetSpec standard();
  // Fields present in `j` override the standard fleet.
  static Result<FleetSpec> from_json(const Json& j);
  Json to_json() const;
};

struct Secret {
  std::string label;
  Bytes bytes;
};

// Provisioned key material for every actor, derived from one seed.
struct Fleet {
  FleetSpec spec;
  Json kdc_db;    // PrincipalDb JSON
  Json registry;  // ISV registry JSON
  std::vector<device::DeviceProfile> devices;
  std::map<std::string, Bytes> images;  // benign program memory per device
  std::map<std::string, client::ClientConfig> clients;
  std::vector<Secret> secrets;          // long-term keys and passwords

  static Result<Fleet> provision(const FleetSpec& spec, std::uint64_t seed);

  const device::DeviceProfile* device(std::string_view name) const;
  const ClientSpec* client_spec(std::string_view name) const;

  // Lays the fleet out as files for the daemons:
  //   kdc.json, isv.json, devices/<name>.json, devices/<name>.img,
  //   clients/<name>.json, fleet.json
  Status write(const std::filesystem::path& dir) const;
};

inline constexpr std::string_view kIsvId = "00000001";

}  // namespace kesic::harness
