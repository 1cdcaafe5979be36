#pragma once

#include <deque>
#include <map>
#include <memory>
#include <string>

#include "kesic/device/device.hpp"
#include "kesic/harness/scenario.hpp"
#include "kesic/isv/isv.hpp"
#include "kesic/kdc/kdc.hpp"

namespace kesic::harness {

// Every actor in one process, joined by a VirtualTransport. Addresses:
// "kdc", "isv:http", "isv:sync", "isv:attest", device names,
// "client:<name>" and "attacker".
class SimBackend final : public Backend {
 public:
  SimBackend(const Fleet& fleet, std::uint64_t seed);
  ~SimBackend() override;

  std::string_view mode() const override { return "simulated"; }
  const Clock& clock() const override { return clock_; }
  StepOutcome advance(Seconds dt) override;

  StepOutcome boot(const std::string& device) override;
  StepOutcome retransmit(const std::string& device) override;
  StepOutcome sleep(const std::string& device) override;
  StepOutcome mutate(const std::string& device, std::size_t offset, std::uint8_t mask) override;
  Result<Json> device_status(const std::string& device) override;
  StepOutcome stop_isv() override;
  StepOutcome restart_isv() override;

  client::KdcLink& kdc_link(const std::string& client) override;
  client::IsvLink& isv_link(const std::string& client) override;
  client::DeviceLink& device_link(const std::string& client) override;

  const std::vector<Packet>& transcript() const override { return net_.log(); }
  SimBackend* sim() override { return this; }

  VirtualTransport& net() { return net_; }
  // Queues a datagram and runs the network until nothing is due.
  std::uint64_t inject(const std::string& from, const std::string& to, std::string payload);
  // Returns the sequence numbers handled, in order.
  std::vector<std::uint64_t> pump();
  std::deque<std::string>& inbox(const std::string& address) { return inboxes_[address]; }
  // Sends and waits for the first reply at `from`; Timeout when none comes,
  // TransportError when the destination is down.
  Result<std::string> request(const std::string& from, const std::string& to, std::string payload);

  device::IotDevice* device(const std::string& name);
  isv::Isv* isv() { return isv_.get(); }
  kdc::Kdc& kdc() { return *kdc_; }

 private:
  struct Links;
  void dispatch(std::uint64_t seq);
  StepOutcome sync_outcome(const std::string& device, std::size_t first_seq);
  Status start_isv();

  const Fleet& fleet_;
  std::uint64_t seed_;
  VirtualClock clock_;
  VirtualTransport net_;
  std::unique_ptr<RandomSource> kdc_rng_;
  std::unique_ptr<RandomSource> isv_rng_;
  std::map<std::string, std::unique_ptr<RandomSource>> device_rngs_;
  std::unique_ptr<kdc::Kdc> kdc_;
  std::unique_ptr<isv::Isv> isv_;
  std::optional<Json> isv_snapshot_;
  std::map<std::string, std::unique_ptr<device::IotDevice>> devices_;
  std::map<std::string, std::deque<std::string>> inboxes_;
  std::map<std::string, std::unique_ptr<Links>> links_;
};

}  // namespace kesic::harness
