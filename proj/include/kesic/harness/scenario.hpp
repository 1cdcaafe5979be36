#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kesic/client/client.hpp"
#include "kesic/harness/fleet.hpp"
#include "kesic/harness/transport.hpp"

namespace kesic::harness {

class SimBackend;

// What a step produced. `verdict` is "ok", an error name (see Errc), a device
// outcome ("accept", "invalid-counter", ...) or an attestation verdict
// ("healthy", "compromised").
struct StepOutcome {
  std::string verdict;
  std::string detail;
  Json data = Json::object();
};

StepOutcome outcome_of(const Status& st);
StepOutcome outcome_of(const Error& e);

// The world a scenario runs against: simulated in-process actors, or the
// real daemons over loopback.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string_view mode() const = 0;
  virtual const Clock& clock() const = 0;
  // Verdicts of packets that became due are listed in data["verdicts"].
  virtual StepOutcome advance(Seconds dt) = 0;

  // Dev_g boot or Dev_pc wake, through to the end of synchronization.
  virtual StepOutcome boot(const std::string& device) = 0;
  virtual StepOutcome retransmit(const std::string& device) = 0;
  virtual StepOutcome sleep(const std::string& device) = 0;
  virtual StepOutcome mutate(const std::string& device, std::size_t offset, std::uint8_t mask) = 0;
  virtual Result<Json> device_status(const std::string& device) = 0;
  virtual StepOutcome stop_isv() = 0;
  virtual StepOutcome restart_isv() = 0;

  virtual client::KdcLink& kdc_link(const std::string& client) = 0;
  virtual client::IsvLink& isv_link(const std::string& client) = 0;
  virtual client::DeviceLink& device_link(const std::string& client) = 0;

  // Everything the eavesdropper saw so far.
  virtual const std::vector<Packet>& transcript() const = 0;
  virtual SimBackend* sim() { return nullptr; }
};

// Declarative script. JSON form:
//   {"name": "...", "description": "...", "seed": 1, "fleet": {...},
//    "steps": [{"do": "login", "client": "alice", "expect": "ok"}, ...]}
// Step vocabulary and expectations are documented in docs/scenario-schema.md.
struct Scenario {
  std::string name;
  std::string description;
  std::optional<std::uint64_t> seed;
  Json fleet = Json::object();
  std::vector<Json> steps;

  static Result<Scenario> parse(const Json& j);
  static Result<Scenario> load(const std::filesystem::path& path);
  Json to_json() const;
  // True when a step needs the simulated network (adversary, replay, ...).
  bool needs_simulation() const;
};

bool is_simulation_only(std::string_view step);

struct RunOptions {
  std::uint64_t seed = 1;
  bool include_transcript = true;
};

class Runner {
 public:
  Runner(const Fleet& fleet, Backend& backend, RunOptions options);
  ~Runner();

  // Runs every step; never throws on expectation failures. The report is a
  // pure function of (fleet, scenario, seed) in simulated mode.
  Json run(const Scenario& scenario);

  // Session keys seen in client caches so far, for the confidentiality probe.
  const std::vector<Secret>& session_secrets() const { return session_secrets_; }

 private:
  struct ClientState;
  ClientState& client(const std::string& name);
  StepOutcome execute(const Json& step);
  StepOutcome do_call(const Json& step);
  StepOutcome do_attest(const Json& step);
  StepOutcome do_check(const Json& step);
  StepOutcome do_forge_tgs(const Json& step);
  StepOutcome do_replay(const Json& step);
  StepOutcome do_inject(const Json& step);
  void harvest();

  const Fleet& fleet_;
  Backend& backend_;
  RunOptions options_;
  std::map<std::string, std::unique_ptr<ClientState>> clients_;
  std::vector<Secret> session_secrets_;
};

enum class Mode { simulated, live };

struct LiveOptions {
  std::filesystem::path bin_dir;   // where the daemons live
  std::filesystem::path work_dir;  // provisioning + clock file; temp when empty
  std::uint16_t base_port = 0;     // 0: pick free ports
};

// Provisions the fleet, builds the backend and runs the scenario.
Result<Json> run_scenario(const Scenario& scenario, std::uint64_t seed, Mode mode = Mode::simulated,
                          const LiveOptions& live = {});

}  // namespace kesic::harness
