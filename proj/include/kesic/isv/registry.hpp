#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "kesic/common/clock.hpp"
#include "kesic/common/json_io.hpp"
#include "kesic/crypto/crypto.hpp"
#include "kesic/wire/fields.hpp"

namespace kesic::isv {

using crypto::SymmetricKey;

using wire::DeviceType;
using wire::parse_device_type;

struct DeviceKeys {
  SymmetricKey kl_sync;
  SymmetricKey kl_tkt;
  SymmetricKey kl_key;
};

// Outstanding Dev_pc attestation for one sync attempt.
struct PendingAttestation {
  wire::Challenge challenge;
  std::uint64_t co_sync = 0;
  std::string device_addr;
  Timestamp deadline = 0;
};

struct DeviceRecord {
  std::string name;
  wire::NumericId id;
  DeviceType type = DeviceType::general;
  DeviceKeys keys;
  std::set<std::string, std::less<>> allow_list;

  std::uint64_t co_sync = 0;

  // Dev_pc only.
  std::uint64_t co_pc = 0;
  std::uint64_t pc_base = 0;
  unsigned window = 16;
  crypto::Digest reference_hash{};
  bool awake = false;
  bool healthy = false;
  bool quarantined = false;
  Timestamp awake_until = 0;
  std::optional<PendingAttestation> pending;
  std::deque<crypto::HmacTag> seen_reports;  // recent attestation reports
};

// The ISV's own identity and Kerberos service credentials.
struct IsvIdentity {
  wire::NumericId id;
  std::string service_id = "isv";
  SymmetricKey service_key;
};

// Device table plus the semantic-name maps. The set of devices is fixed after
// load; each record has its own mutex so counter updates serialize per device.
//
// JSON form:
//   {"isv": {"id": "00000001", "service_id": "isv", "service_key": "<hex>"},
//    "clients": {"alice": "00000101"},
//    "devices": [{"name": "lamp", "id": "00000007", "type": "general",
//                 "allow": ["alice"], "kl_sync": "<hex>", "kl_tkt": "<hex>",
//                 "kl_key": "<hex>", "window": 16, "reference_sha256": "<hex>"}]}
class Registry {
 public:
  static Result<Registry> from_json(const Json& j);
  static Result<Registry> load(const std::filesystem::path& path);

  const IsvIdentity& identity() const { return identity_; }
  std::optional<wire::NumericId> client_id(std::string_view name) const;
  std::optional<wire::NumericId> device_id(std::string_view name) const;

  // Runs fn(record) under the device's lock; fn returns a Result. UnknownDevice
  // when absent.
  template <typename Fn>
  auto with_device(const wire::NumericId& id, Fn&& fn) -> std::invoke_result_t<Fn, DeviceRecord&> {
    auto it = devices_.find(id);
    if (it == devices_.end()) return make_error(Errc::UnknownDevice, id.render());
    std::lock_guard lock(it->second->mu);
    return fn(it->second->record);
  }

  // Counter snapshot: {"<id>": {"co_sync": n, "co_pc": n}}.
  Json snapshot();
  Status restore(const Json& snap);

  std::vector<wire::NumericId> device_ids() const;

 private:
  struct Slot {
    explicit Slot(DeviceRecord r) : record(std::move(r)) {}
    std::mutex mu;
    DeviceRecord record;
  };
  explicit Registry(IsvIdentity identity) : identity_(std::move(identity)) {}

  IsvIdentity identity_;
  std::map<std::string, wire::NumericId, std::less<>> clients_;
  std::map<std::string, wire::NumericId, std::less<>> device_names_;
  std::map<wire::NumericId, std::unique_ptr<Slot>> devices_;
};

}  // namespace kesic::isv
