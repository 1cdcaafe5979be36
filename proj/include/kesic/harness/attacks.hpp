#pragma once

#include <string>
#include <vector>

#include "kesic/harness/scenario.hpp"

namespace kesic::harness {

// One adversarial scenario against one protocol leg.
struct Attack {
  std::string name;
  std::string leg;         // as, tgs, isv-ticket, sync, attest, service-g, service-pc
  std::string capability;  // eavesdrop, replay, tamper, impersonate, drop-delay
  Scenario scenario;
};

// The catalogue for a provisioned standard fleet. Forged frames are built
// with `seed`, so the catalogue itself is deterministic.
std::vector<Attack> attack_catalog(const Fleet& fleet, std::uint64_t seed);

// Every rejection path the suite has to reach at least once, by the name
// the transcript records: Errc names for the ISV, device outcomes or Errc
// names for the devices ("not-synced" is the invalid-request raised before
// synchronization).
const std::vector<std::string>& required_isv_verdicts();
const std::vector<std::string>& required_device_verdicts();

struct SuiteOptions {
  std::uint64_t seed = 1;
  bool include_transcripts = true;
};

// Provisions the standard fleet once and runs the whole catalogue. The
// report is byte-identical across runs with the same seed.
Result<Json> run_attack_suite(const SuiteOptions& options);
Json run_attack_suite(const Fleet& fleet, const SuiteOptions& options);

}  // namespace kesic::harness
