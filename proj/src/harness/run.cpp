#include <set>

#include "kesic/harness/live.hpp"
#include "kesic/harness/scenario.hpp"
#include "kesic/harness/sim.hpp"

namespace kesic::harness {

namespace {

Status check_names(const Scenario& sc, const Fleet& fleet) {
  for (std::size_t i = 0; i < sc.steps.size(); ++i) {
    const auto& step = sc.steps[i];
    auto where = "step " + std::to_string(i) + ": ";
    if (step.contains("client") && !fleet.clients.count(step.at("client").get<std::string>())) {
      return make_error(Errc::ScriptError, where + "unknown client " + step.at("client").dump());
    }
    static const std::set<std::string> kDeviceSteps = {"boot", "retransmit", "sleep",
                                                       "mutate_memory", "check", "attest"};
    // Ticket and call steps may name unknown devices on purpose.
    if (kDeviceSteps.count(step.at("do").get<std::string>()) && step.contains("device") &&
        !fleet.device(step.at("device").get<std::string>())) {
      return make_error(Errc::ScriptError, where + "unknown device " + step.at("device").dump());
    }
  }
  return ok_status();
}

}  // namespace

Result<Json> run_scenario(const Scenario& scenario, std::uint64_t seed, Mode mode,
                          const LiveOptions& live) {
  KESIC_TRY(spec, FleetSpec::from_json(scenario.fleet));
  KESIC_TRY(fleet, Fleet::provision(spec, seed));
  KESIC_CHECK(check_names(scenario, fleet));

  if (mode == Mode::live) {
    if (scenario.needs_simulation()) {
      return make_error(Errc::ScriptError, "adversary, replay and inject steps need simulated mode");
    }
    KESIC_TRY(backend, LiveBackend::start(fleet, seed, live));
    Runner runner(fleet, *backend, RunOptions{seed});
    return runner.run(scenario);
  }
  SimBackend backend(fleet, seed);
  Runner runner(fleet, backend, RunOptions{seed});
  return runner.run(scenario);
}

}  // namespace kesic::harness
