#include <gtest/gtest.h>

#include "kesic/harness/attacks.hpp"
#include "kesic/harness/probe.hpp"
#include "kesic/harness/scenario.hpp"
#include "kesic/harness/sim.hpp"

namespace kesic::harness {
namespace {

const Fleet& standard_fleet() {
  static const Fleet fleet = Fleet::provision(FleetSpec::standard(), 7).value();
  return fleet;
}

Json run_steps(const Json& steps, std::uint64_t seed = 7) {
  auto sc = Scenario::parse(Json{{"name", "t"}, {"steps", steps}});
  EXPECT_TRUE(sc.ok());
  SimBackend backend(standard_fleet(), seed);
  Runner runner(standard_fleet(), backend, RunOptions{seed});
  return runner.run(*sc);
}

void expect_passed(const Json& report) {
  EXPECT_TRUE(report.at("passed").get<bool>()) << report.at("first_failure").dump() << "\n"
                                               << report.at("steps").dump(1);
}

TEST(Transport, ReliableFifoWithoutHooks) {
  VirtualClock clock(100);
  VirtualTransport net(clock, 1);
  auto a = net.send("x", "y", "one");
  auto b = net.send("x", "y", "two");
  EXPECT_EQ(net.next_ready(), a);
  EXPECT_EQ(net.next_ready(), b);
  EXPECT_FALSE(net.next_ready());
}

TEST(Transport, DelayHoldsUntilClockMoves) {
  VirtualClock clock(100);
  VirtualTransport net(clock, 1);
  net.add_hook(LinkHook::from_json(Json{{"action", "delay"}, {"dt", 5}}).value());
  auto a = net.send("x", "y", "late");
  EXPECT_FALSE(net.next_ready());
  clock.advance(5);
  EXPECT_EQ(net.next_ready(), a);
}

TEST(Transport, DropAndTamperAreRecorded) {
  VirtualClock clock(0);
  VirtualTransport net(clock, 1);
  net.add_hook(LinkHook::from_json(Json{{"action", "drop"}, {"count", 1}}).value());
  auto a = net.send("x", "y", "gone");
  EXPECT_EQ(net.packet(a).fate, "dropped");
  net.add_hook(LinkHook::from_json(Json{{"action", "tamper"}, {"offset", 0}, {"xor", 1}}).value());
  auto b = net.send("x", "y", "a");
  EXPECT_EQ(net.packet(b).payload, "`");
}

TEST(Transport, ProbabilisticHooksAreSeeded) {
  auto pattern = [](std::uint64_t seed) {
    VirtualClock clock(0);
    VirtualTransport net(clock, seed);
    net.add_hook(LinkHook::from_json(Json{{"action", "drop"}, {"p", 0.5}}).value());
    std::string fates;
    for (int i = 0; i < 64; ++i) fates += net.packet(net.send("x", "y", "p")).fate[0];
    return fates;
  };
  EXPECT_EQ(pattern(3), pattern(3));
  EXPECT_NE(pattern(3), pattern(4));
}

TEST(Transport, GlobMatching) {
  EXPECT_TRUE(glob_match("*", "anything"));
  EXPECT_TRUE(glob_match("client:*", "client:alice"));
  EXPECT_FALSE(glob_match("client:*", "kdc"));
  EXPECT_TRUE(glob_match("kdc", "kdc"));
}

TEST(Probe, FindsSecretInEveryEncoding) {
  Bytes secret(16);
  for (std::size_t i = 0; i < secret.size(); ++i) secret[i] = static_cast<std::uint8_t>(0xA0 + i);
  std::vector<Secret> secrets{{"k", secret}};
  for (std::size_t pad = 0; pad < 3; ++pad) {
    Bytes blob(pad, 0x11);
    blob.insert(blob.end(), secret.begin(), secret.end());
    blob.push_back(0x22);
    Packet p;
    p.payload = "{\"x\":\"" + base64_encode(blob) + "\"}";
    EXPECT_EQ(scan_for_secrets(secrets, {p}).size(), 1u) << "pad " << pad;
  }
  Packet hex;
  hex.payload = "id=" + to_hex(secret);
  EXPECT_EQ(scan_for_secrets(secrets, {hex}).size(), 1u);
  Packet raw;
  raw.payload = std::string("\x01", 1) + to_string(secret);
  EXPECT_EQ(scan_for_secrets(secrets, {raw}).size(), 1u);
  Packet clean;
  clean.payload = "nothing to see";
  EXPECT_TRUE(scan_for_secrets(secrets, {clean}).empty());
}

TEST(Scenario, RejectsMalformedScripts) {
  EXPECT_EQ(Scenario::parse(Json{{"name", "x"}}).code(), Errc::ScriptError);
  EXPECT_EQ(Scenario::parse(Json{{"steps", Json::array({{{"do", "dance"}}})}}).code(),
            Errc::ScriptError);
  EXPECT_EQ(Scenario::parse(Json{{"steps", Json::array({{{"do", "call"}, {"client", "a"}}})}}).code(),
            Errc::ScriptError);
  EXPECT_EQ(Scenario::parse(Json{{"steps", Json::array({{{"do", "login"}, {"client", "a"},
                                                         {"expect", 3}}})}})
                .code(),
            Errc::ScriptError);
}

TEST(Scenario, UnknownClientFailsTheRun) {
  auto sc = Scenario::parse(Json{{"steps", Json::array({{{"do", "login"}, {"client", "eve"}}})}});
  ASSERT_TRUE(sc.ok());
  EXPECT_EQ(run_scenario(*sc, 1).code(), Errc::ScriptError);
}

TEST(Scenario, SimOnlyStepsRefusedLive) {
  auto sc = Scenario::parse(Json{{"steps", Json::array({{{"do", "clear_adversary"}}})}});
  ASSERT_TRUE(sc.ok());
  EXPECT_TRUE(sc->needs_simulation());
  EXPECT_EQ(run_scenario(*sc, 1, Mode::live).code(), Errc::ScriptError);
}

TEST(Sim, GeneralDeviceHappyPath) {
  auto report = run_steps(Json::parse(R"([
    {"do": "boot", "device": "lamp", "expect": "ok"},
    {"do": "login", "client": "alice", "expect": "ok", "expect_data": {"tgt_cached": true}},
    {"do": "ticket", "client": "alice", "device": "lamp", "expect": "ok",
     "expect_data": {"type": "general"}},
    {"do": "call", "client": "alice", "device": "lamp", "cmd": "LED_ON", "expect": "accept"},
    {"do": "check", "device": "lamp", "led": true},
    {"do": "call", "client": "alice", "device": "lamp", "cmd": "LED_OFF", "expect": "accept"},
    {"do": "check", "device": "lamp", "led": false},
    {"do": "attest", "client": "alice", "device": "lamp", "expect": "healthy"}
  ])"));
  expect_passed(report);
  EXPECT_TRUE(report.at("confidentiality").at("leaks").empty());
  EXPECT_GT(report.at("confidentiality").at("secrets_checked").get<int>(), 5);
}

TEST(Sim, PerCommandDeviceHappyPath) {
  auto report = run_steps(Json::parse(R"([
    {"do": "boot", "device": "sensor", "expect": "ok"},
    {"do": "login", "client": "alice"},
    {"do": "ticket", "client": "alice", "device": "sensor", "expect": "ok",
     "expect_data": {"type": "power-constrained"}},
    {"do": "call", "client": "alice", "device": "sensor", "cmd": "LED_ON", "expect": "accept"},
    {"do": "call", "client": "alice", "device": "sensor", "cmd": "LED_OFF", "expect": "TicketExpired"},
    {"do": "call", "client": "alice", "device": "sensor", "cmd": "LED_OFF",
     "reuse_consumed": true, "expect": "invalid-counter"},
    {"do": "ticket", "client": "alice", "device": "sensor", "expect": "ok"}
  ])"));
  expect_passed(report);
}

TEST(Sim, ReportIsDeterministic) {
  auto steps = Json::parse(R"([
    {"do": "boot", "device": "lamp"},
    {"do": "login", "client": "bob"},
    {"do": "ticket", "client": "bob", "device": "lamp"},
    {"do": "call", "client": "bob", "device": "lamp", "cmd": "LED_ON", "expect": "accept"}
  ])");
  EXPECT_EQ(run_steps(steps, 11).dump(), run_steps(steps, 11).dump());
}

TEST(Sim, FailedExpectationIsReported) {
  auto report = run_steps(Json::parse(R"([
    {"do": "login", "client": "alice", "password": "nope", "expect": "ok"}
  ])"));
  EXPECT_FALSE(report.at("passed").get<bool>());
  EXPECT_EQ(report.at("steps")[0].at("verdict"), "AuthFailure");
}

TEST(Sim, DelayedAttestationTimesOut) {
  auto report = run_steps(Json::parse(R"([
    {"do": "adversary", "action": "delay", "kind": "attest_response", "dt": 10},
    {"do": "boot", "device": "sensor", "expect": "Timeout"},
    {"do": "advance", "seconds": 10, "expect_data": {"verdicts": ["Timeout"]}}
  ])"));
  expect_passed(report);
}

TEST(Sim, IsvRestartKeepsCounters) {
  auto report = run_steps(Json::parse(R"([
    {"do": "boot", "device": "lamp", "expect": "ok"},
    {"do": "boot", "device": "lamp", "expect": "ok"},
    {"do": "stop_isv"},
    {"do": "login", "client": "alice"},
    {"do": "ticket", "client": "alice", "device": "lamp", "expect": "TransportError"},
    {"do": "restart_isv"},
    {"do": "replay", "kind": "sync_request", "nth": 0, "expect": "CounterOutOfRange"},
    {"do": "ticket", "client": "alice", "device": "lamp", "expect": "ok"},
    {"do": "call", "client": "alice", "device": "lamp", "cmd": "LED_ON", "expect": "accept"}
  ])"));
  expect_passed(report);
}

}  // namespace
}  // namespace kesic::harness

namespace kesic::harness {
namespace {

TEST(Attacks, EveryAttackFailsAndCoverageIsComplete) {
  auto report = run_attack_suite(standard_fleet(), SuiteOptions{7, false});
  for (const auto& a : report.at("attacks")) {
    EXPECT_TRUE(a.at("passed").get<bool>()) << a.at("name") << ": " << a.at("first_failure").dump();
  }
  EXPECT_TRUE(report.at("coverage").at("missing").empty()) << report.at("coverage").dump();
  EXPECT_EQ(report.at("leaks"), 0);
  EXPECT_TRUE(report.at("passed").get<bool>());
}

}  // namespace
}  // namespace kesic::harness
