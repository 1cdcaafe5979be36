#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "kesic/common/json_io.hpp"
#include "kesic/device/rot.hpp"

namespace kesic::device {

// Provisioning record for one device.
//
// JSON form:
//   {"name": "lamp", "id": "00000007", "type": "general", "isv_id": "00000001",
//    "kl_sync": "<hex>", "kl_tkt": "<hex>", "kl_key": "<hex>",
//    "window": 16, "freshness_window": 300, "seal_responses": false,
//    "counter_file": "lamp.co_sync", "memory_image": "lamp.img"}
struct DeviceProfile {
  std::string name;
  RotConfig rot;
  std::string kl_sync_hex, kl_tkt_hex, kl_key_hex;
  std::filesystem::path counter_file;  // empty: in-memory counter
  std::filesystem::path memory_image;  // empty: image supplied by the caller

  static Result<DeviceProfile> from_json(const Json& j);
  static Result<DeviceProfile> load(const std::filesystem::path& path);
  Json to_json() const;
};

// Where a reply datagram should go.
enum class ReplyTo { sender, isv_attest };

struct DeviceEvent {
  std::string kind;  // frame kind handled, or "ignored"
  Status status = ok_status();
  std::optional<ServiceVerdict> verdict;
  std::optional<std::string> reply;
  ReplyTo reply_to = ReplyTo::sender;
};

// Non-secure half: frame dispatch, LED actuation, program memory, and the
// sleep/wake lifecycle. Frames are told apart by length.
class IotDevice {
 public:
  IotDevice(const DeviceProfile& profile, std::unique_ptr<CounterStore> counter, Bytes memory,
            const Clock& timer, RandomSource& rng);

  const std::string& name() const { return name_; }
  wire::DeviceType type() const { return type_; }
  wire::NumericId id() const { return id_; }

  // Starts a sync (boot for Dev_g, wake for Dev_pc); returns the frame for
  // the ISV sync port.
  Result<std::string> start_sync();
  Result<std::string> retransmit_sync() const { return rot_.resend_sync(); }

  DeviceEvent on_datagram(std::string_view payload);

  // Test-mode control datagrams ("CTL STATUS", "CTL MUTATE <offset> <xor>").
  void enable_control(bool on) { control_ = on; }

  // Harness hooks. Sleep drops all traffic and loses RAM state.
  void sleep();
  void wake();
  void reboot();
  bool awake() const { return awake_; }
  void mutate_memory(std::size_t offset, std::uint8_t xor_mask);

  bool led() const { return led_; }
  bool synced() const { return rot_.synced(); }
  Result<Timestamp> local_time() const { return rot_.local_time(); }
  std::uint64_t co_sync() const { return rot_.co_sync(); }
  std::optional<std::pair<std::uint64_t, unsigned>> window() const { return rot_.window(); }
  const Bytes& memory() const { return memory_; }
  Json status() const;

 private:
  std::string actuate(wire::Command cmd);
  DeviceEvent control(std::string_view payload);

  std::string name_;
  wire::DeviceType type_;
  wire::NumericId id_;
  std::unique_ptr<CounterStore> counter_;
  Bytes memory_;
  RootOfTrust rot_;
  bool led_ = false;
  bool awake_ = true;
  bool control_ = false;
};

// Deterministic stand-in firmware image for a device without one on disk.
Bytes default_memory_image(std::string_view device_name, std::size_t size = 4096);

}  // namespace kesic::device
