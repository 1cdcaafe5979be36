// kesic-sim: scripted scenarios, the attack suite, and fleet provisioning.
#include <CLI11.hpp>

#include <iostream>

#include "kesic/harness/attacks.hpp"
#include "kesic/harness/scenario.hpp"

using namespace kesic;
using namespace kesic::harness;

namespace {

constexpr int kPassed = 0;
constexpr int kFailed = 1;
constexpr int kBroken = 2;

int emit(const Json& report, const std::string& out) {
  auto text = report.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
    return 0;
  }
  if (auto st = write_file_atomic(out, text); !st) {
    std::cerr << "error: " << st.error().message() << "\n";
    return kBroken;
  }
  return 0;
}

void summarize_steps(const Json& report) {
  for (const auto& s : report.at("steps")) {
    std::cerr << (s.at("pass").get<bool>() ? "  pass " : "  FAIL ") << s.at("index") << " "
              << s.at("step").at("do").get<std::string>() << " -> " << s.at("verdict").get<std::string>();
    if (s.contains("failure")) std::cerr << " (" << s.at("failure").get<std::string>() << ")";
    std::cerr << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KESIC simulator and test harness"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a scenario script");
  std::string scenario_path, out;
  std::optional<std::uint64_t> seed;
  bool live = false, quiet = false;
  LiveOptions live_opts;
  run->add_option("scenario", scenario_path)->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "overrides the scenario's seed");
  run->add_flag("--live", live, "spawn the real daemons on loopback");
  run->add_option("--bin-dir", live_opts.bin_dir, "where kesic-kdc/isv/device live (live mode)");
  run->add_option("--work-dir", live_opts.work_dir, "kept after the run (live mode)");
  run->add_option("--out", out, "report file (default stdout)");
  run->add_flag("-q,--quiet", quiet, "no per-step summary on stderr");

  auto* attacks = app.add_subcommand("attacks", "run the attack suite");
  std::uint64_t suite_seed = 1;
  bool no_transcripts = false;
  attacks->add_option("--seed", suite_seed);
  attacks->add_option("--out", out, "report file (default stdout)");
  attacks->add_flag("--no-transcripts", no_transcripts, "omit per-attack transcripts");

  auto* provision = app.add_subcommand("provision", "write provisioning files for every actor");
  std::string dir, fleet_path;
  std::uint64_t prov_seed = 1;
  provision->add_option("dir", dir)->required();
  provision->add_option("--fleet", fleet_path, "fleet spec (JSON); default: the standard fleet")
      ->check(CLI::ExistingFile);
  provision->add_option("--seed", prov_seed, "key material seed");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    auto sc = Scenario::load(scenario_path);
    if (!sc) {
      std::cerr << "error: " << sc.error().message() << "\n";
      return kBroken;
    }
    auto s = seed ? *seed : sc->seed.value_or(1);
    if (live && live_opts.bin_dir.empty()) {
      live_opts.bin_dir = std::filesystem::read_symlink("/proc/self/exe").parent_path();
    }
    auto report = run_scenario(*sc, s, live ? Mode::live : Mode::simulated, live_opts);
    if (!report) {
      std::cerr << "error: " << report.error().message() << "\n";
      return kBroken;
    }
    if (!quiet) {
      std::cerr << report->at("scenario").get<std::string>() << " (" << report->at("mode").get<std::string>()
                << ", seed " << s << ")\n";
      summarize_steps(*report);
      std::cerr << (report->at("passed").get<bool>() ? "PASSED" : "FAILED") << "\n";
    }
    if (int rc = emit(*report, out); rc) return rc;
    return report->at("passed").get<bool>() ? kPassed : kFailed;
  }

  if (attacks->parsed()) {
    auto report = run_attack_suite(SuiteOptions{suite_seed, !no_transcripts});
    if (!report) {
      std::cerr << "error: " << report.error().message() << "\n";
      return kBroken;
    }
    for (const auto& a : report->at("attacks")) {
      std::cerr << (a.at("passed").get<bool>() ? "  blocked " : "  FAIL    ") << a.at("leg").get<std::string>()
                << "/" << a.at("capability").get<std::string>() << " " << a.at("name").get<std::string>() << "\n";
    }
    const auto& missing = report->at("coverage").at("missing");
    if (!missing.empty()) std::cerr << "uncovered rejection paths: " << missing.dump() << "\n";
    std::cerr << (report->at("passed").get<bool>() ? "PASSED" : "FAILED") << "\n";
    if (int rc = emit(*report, out); rc) return rc;
    return report->at("passed").get<bool>() ? kPassed : kFailed;
  }

  if (provision->parsed()) {
    FleetSpec spec = FleetSpec::standard();
    if (!fleet_path.empty()) {
      auto j = read_json_file(fleet_path);
      if (!j) {
        std::cerr << "error: " << j.error().message() << "\n";
        return kBroken;
      }
      auto parsed = FleetSpec::from_json(*j);
      if (!parsed) {
        std::cerr << "error: " << parsed.error().message() << "\n";
        return kBroken;
      }
      spec = *parsed;
    }
    auto fleet = Fleet::provision(spec, prov_seed);
    if (!fleet) {
      std::cerr << "error: " << fleet.error().message() << "\n";
      return kBroken;
    }
    if (auto st = fleet->write(dir); !st) {
      std::cerr << "error: " << st.error().message() << "\n";
      return kBroken;
    }
    std::cerr << "provisioned " << spec.clients.size() << " clients and " << spec.devices.size()
              << " devices in " << dir << "\n";
    return kPassed;
  }
  return kBroken;
}
