#pragma once

#include <sys/types.h>

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kesic/harness/scenario.hpp"
#include "kesic/net/udp.hpp"

namespace kesic::harness {

// Runs the real daemons on loopback and drives them like the simulator
// does. Time is a shared clock file that every process reads, so scripted
// `advance` steps still work. Traffic the runner cannot see (device to ISV)
// is missing from the transcript.
class LiveBackend final : public Backend {
 public:
  // PortInUse / StartupTimeout when the daemons do not come up.
  static Result<std::unique_ptr<LiveBackend>> start(const Fleet& fleet, std::uint64_t seed,
                                                    const LiveOptions& options);
  ~LiveBackend() override;

  std::string_view mode() const override { return "live"; }
  const Clock& clock() const override { return *clock_; }
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

  const std::vector<Packet>& transcript() const override { return transcript_; }

  void record(const std::string& from, const std::string& to, std::string payload);

 private:
  struct Links;
  LiveBackend(const Fleet& fleet, std::uint64_t seed, LiveOptions options);

  Status launch();
  Result<pid_t> spawn(const std::string& name, const std::vector<std::string>& args);
  Status spawn_isv();
  Result<std::string> control(const std::string& device, const std::string& verb);
  StepOutcome wait_synced(const std::string& device);
  void stop(pid_t& pid);

  const Fleet& fleet_;
  std::uint64_t seed_;
  LiveOptions options_;
  bool own_work_dir_ = false;
  std::filesystem::path clock_file_;
  std::unique_ptr<Clock> clock_;

  net::Endpoint kdc_ep_;
  std::uint16_t http_port_ = 0;
  net::Endpoint sync_ep_;
  net::Endpoint attest_ep_;
  std::map<std::string, net::Endpoint> device_eps_;

  pid_t kdc_pid_ = -1;
  pid_t isv_pid_ = -1;
  std::map<std::string, pid_t> device_pids_;

  std::vector<Packet> transcript_;
  std::map<std::string, std::unique_ptr<Links>> links_;
};

}  // namespace kesic::harness
