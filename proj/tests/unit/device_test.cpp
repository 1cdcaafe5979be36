#include "kesic/device/device.hpp"

#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

namespace kesic::device {
namespace {

using crypto::KeyRole;
using wire::DeviceType;

constexpr Timestamp kT0 = 1'700'000'000;

wire::NumericId nid(std::uint32_t v) { return *wire::NumericId::make(v); }

// Holds one device plus the ISV-side knowledge needed to talk to it.
struct Bench {
  Bench(DeviceType type, unsigned window = 16, Seconds freshness = 300)
      : rng(21),
        timer(5'000),
        kl_sync(SymmetricKey::generate(rng, KeyRole::lt_sync)),
        kl_tkt(SymmetricKey::generate(rng, KeyRole::lt_ticket)),
        kl_key(SymmetricKey::generate(rng, KeyRole::lt_sesskey)) {
    profile.name = type == DeviceType::general ? "lamp" : "sensor";
    profile.rot = RotConfig{type, nid(7), nid(1), window, freshness, false};
    profile.kl_sync_hex = kl_sync.hex();
    profile.kl_tkt_hex = kl_tkt.hex();
    profile.kl_key_hex = kl_key.hex();
    auto store = std::make_unique<MemoryCounterStore>();
    counter = store.get();
    dev = std::make_unique<IotDevice>(profile, std::move(store), default_memory_image("dev", 256),
                                      timer, rng);
  }

  std::string sync_response(std::uint64_t co_sync, Timestamp val) const {
    auto mac = crypto::hmac(kl_sync, wire::sync_response_mac_input(nid(1), co_sync, val));
    return wire::encode(wire::SyncResponse{nid(1), co_sync, val, mac});
  }

  std::string attest_request(const wire::Challenge& c) const {
    auto mac = crypto::hmac(kl_sync, wire::attest_request_mac_input(nid(1), c));
    return wire::encode(wire::AttestRequest{nid(1), c, mac});
  }

  void sync(Timestamp val) {
    auto req = dev->start_sync();
    ASSERT_TRUE(req.ok());
    auto decoded = wire::decode_sync_request(*req);
    ASSERT_TRUE(decoded.ok());
    if (profile.rot.type == DeviceType::power_constrained) {
      auto ev = dev->on_datagram(attest_request(wire::Challenge::generate(rng)));
      ASSERT_TRUE(ev.status.ok()) << ev.status.error().message();
    }
    ASSERT_TRUE(dev->on_datagram(sync_response(decoded->co_sync, val)).status.ok());
  }

  wire::ServiceRequestG request_g(wire::Command cmd, Timestamp lifetime, Timestamp ts,
                                  std::uint32_t client = 101) const {
    auto f = wire::ticket_fields_g(nid(client), addr, lifetime, nid(7));
    auto ticket = crypto::make_iot_ticket_g(kl_tkt, f.id_c, f.ad_c, f.nonce, f.id_dev);
    auto k = crypto::make_session_key_g(kl_key, f.id_c, f.ad_c, f.nonce, f.id_dev);
    auto auth = crypto::hmac(*k, wire::service_authenticator_input(ts));
    return wire::ServiceRequestG{cmd, nid(client), addr, lifetime, *ticket, ts, auth};
  }

  wire::ServiceRequestPC request_pc(wire::Command cmd, std::uint64_t co_pc) const {
    auto f = wire::ticket_fields_pc(nid(101), addr, co_pc, nid(7));
    auto ticket = crypto::make_iot_ticket_pc(kl_tkt, f.id_c, f.ad_c, f.nonce, f.id_dev);
    return wire::ServiceRequestPC{cmd, nid(101), addr, co_pc, *ticket};
  }

  Outcome send(const std::string& frame) {
    auto ev = dev->on_datagram(frame);
    EXPECT_TRUE(ev.verdict.has_value());
    return ev.verdict ? ev.verdict->outcome : Outcome::invalid_request;
  }

  SeededRandom rng;
  VirtualClock timer;
  SymmetricKey kl_sync, kl_tkt, kl_key;
  DeviceProfile profile;
  MemoryCounterStore* counter = nullptr;
  std::unique_ptr<IotDevice> dev;
  wire::Address addr{0x0a000002};
};

// ---------------------------------------------------------------- Dev_g sync

TEST(GeneralDeviceSync, StartTimeComesFromIsv) {
  Bench b(DeviceType::general);
  EXPECT_EQ(b.dev->local_time().code(), Errc::NotSynced);
  b.sync(kT0);
  EXPECT_EQ(*b.dev->local_time(), kT0);
  b.timer.advance(60);
  EXPECT_EQ(*b.dev->local_time(), kT0 + 60);
  EXPECT_EQ(b.dev->co_sync(), 1u);
}

TEST(GeneralDeviceSync, TamperedSyncValueIsRejected) {
  Bench b(DeviceType::general);
  auto req = wire::decode_sync_request(*b.dev->start_sync());
  auto frame = b.sync_response(req->co_sync, kT0);
  auto off = wire::field_offset(wire::FrameKind::sync_response, "sync_val");
  frame[off + 31] = frame[off + 31] == '9' ? '8' : '9';
  EXPECT_EQ(b.dev->on_datagram(frame).status.code(), Errc::AuthFailure);
  EXPECT_FALSE(b.dev->synced());
  EXPECT_TRUE(b.dev->on_datagram(b.sync_response(req->co_sync, kT0)).status.ok());
}

TEST(GeneralDeviceSync, RetransmitKeepsCounter) {
  Bench b(DeviceType::general);
  auto first = *b.dev->start_sync();
  auto again = *b.dev->retransmit_sync();
  EXPECT_EQ(first, again);
  EXPECT_EQ(b.counter->load(), 1u);
}

TEST(GeneralDeviceSync, ResponseFromPreviousBootIsRejected) {
  Bench b(DeviceType::general);
  b.sync(kT0);
  auto old = b.sync_response(1, kT0);
  b.dev->reboot();
  ASSERT_TRUE(b.dev->start_sync().ok());
  EXPECT_EQ(b.dev->on_datagram(old).status.code(), Errc::AuthFailure);
  EXPECT_FALSE(b.dev->synced());
}

TEST(GeneralDeviceSync, UnsolicitedResponseIsRejected) {
  Bench b(DeviceType::general);
  EXPECT_EQ(b.dev->on_datagram(b.sync_response(1, kT0)).status.code(), Errc::AuthFailure);
}

TEST(GeneralDeviceSync, CounterSurvivesRebootOnDisk) {
  auto path = std::filesystem::temp_directory_path() / "kesic_device_test.co_sync";
  std::filesystem::remove(path);
  {
    FileCounterStore store(path);
    EXPECT_EQ(store.load(), 0u);
    ASSERT_TRUE(store.store(41).ok());
  }
  FileCounterStore reopened(path);
  EXPECT_EQ(reopened.load(), 41u);
  std::filesystem::remove(path);
}

// ---------------------------------------------------------------- Dev_g service

TEST(GeneralDeviceService, HappyPathTurnsLedOn) {
  Bench b(DeviceType::general);
  b.sync(kT0);
  auto ev = b.dev->on_datagram(wire::encode(b.request_g(wire::Command::led_on, kT0 + 600, kT0)));
  ASSERT_TRUE(ev.verdict);
  EXPECT_EQ(ev.verdict->outcome, Outcome::accept);
  EXPECT_EQ(*ev.reply, "OK LED_ON");
  EXPECT_TRUE(b.dev->led());
}

TEST(GeneralDeviceService, RefusesBeforeSync) {
  Bench b(DeviceType::general);
  auto ev = b.dev->on_datagram(wire::encode(b.request_g(wire::Command::led_on, kT0 + 600, kT0)));
  EXPECT_EQ(ev.verdict->outcome, Outcome::invalid_request);
  EXPECT_EQ(ev.verdict->reason, "not synced");
  EXPECT_FALSE(b.dev->led());
}

TEST(GeneralDeviceService, ExtendedLifetimeFailsTicketRecomputation) {
  Bench b(DeviceType::general);
  b.sync(kT0);
  auto req = b.request_g(wire::Command::led_on, kT0 + 600, kT0);
  req.lifetime = kT0 + 60'000;
  auto ev = b.dev->on_datagram(wire::encode(req));
  EXPECT_EQ(ev.verdict->outcome, Outcome::auth_failure);
  EXPECT_EQ(ev.verdict->reason, "ticket mismatch");
  EXPECT_EQ(*ev.reply, "Auth Failure");
}

TEST(GeneralDeviceService, StaleReplayIsInvalidRequest) {
  Bench b(DeviceType::general);
  b.sync(kT0);
  auto frame = wire::encode(b.request_g(wire::Command::led_on, kT0 + 600, kT0));
  EXPECT_EQ(b.send(frame), Outcome::accept);
  b.timer.advance(400);
  EXPECT_EQ(b.send(frame), Outcome::invalid_request);
}

TEST(GeneralDeviceService, ReplayInsideWindowIsCaughtBySeenSet) {
  Bench b(DeviceType::general);
  b.sync(kT0);
  auto frame = wire::encode(b.request_g(wire::Command::led_on, kT0 + 600, kT0));
  EXPECT_EQ(b.send(frame), Outcome::accept);
  b.timer.advance(10);
  EXPECT_EQ(b.send(frame), Outcome::invalid_request);
  // A different client at the same second is a different entry.
  EXPECT_EQ(b.send(wire::encode(b.request_g(wire::Command::led_on, kT0 + 600, kT0, 102))),
            Outcome::accept);
}

TEST(GeneralDeviceService, ExpiredTicketAndBadAuthenticator) {
  Bench b(DeviceType::general);
  b.sync(kT0);
  EXPECT_EQ(b.send(wire::encode(b.request_g(wire::Command::led_on, kT0, kT0))),
            Outcome::ticket_expired);
  auto req = b.request_g(wire::Command::led_on, kT0 + 600, kT0);
  req.authenticator = crypto::hmac(b.kl_key, "wrong");
  auto ev = b.dev->on_datagram(wire::encode(req));
  EXPECT_EQ(ev.verdict->outcome, Outcome::auth_failure);
  EXPECT_EQ(ev.verdict->reason, "authenticator mismatch");
}

TEST(GeneralDeviceService, MultiUseUntilLifetimeThenNever) {
  Bench b(DeviceType::general);
  b.sync(kT0);
  const Timestamp lf6 = kT0 + 600;
  int accepted_before = 0, accepted_after = 0;
  for (Seconds t = 0; t < 900; t += 30) {
    Timestamp now = kT0 + t;
    auto outcome = b.send(wire::encode(b.request_g(wire::Command::led_off, lf6, now)));
    if (now < lf6) {
      EXPECT_EQ(outcome, Outcome::accept) << "t=" << t;
      accepted_before += outcome == Outcome::accept;
    } else {
      EXPECT_EQ(outcome, Outcome::ticket_expired) << "t=" << t;
      accepted_after += outcome == Outcome::accept;
    }
    b.timer.advance(30);
  }
  EXPECT_EQ(accepted_before, 20);
  EXPECT_EQ(accepted_after, 0);
}

TEST(GeneralDeviceService, AttestReportMatchesVerifier) {
  Bench b(DeviceType::general);
  b.sync(kT0);
  auto req = b.request_g(wire::Command::attest, kT0 + 600, kT0);
  auto ev = b.dev->on_datagram(wire::encode(req));
  ASSERT_EQ(ev.verdict->outcome, Outcome::accept);

  auto f = wire::ticket_fields_g(nid(101), b.addr, kT0 + 600, nid(7));
  auto k = crypto::make_session_key_g(b.kl_key, f.id_c, f.ad_c, f.nonce, f.id_dev);
  auto expected = crypto::attest_memory(*k, default_memory_image("dev", 256));
  EXPECT_EQ(*ev.reply, "OK ATTEST " + expected->hex());

  b.dev->mutate_memory(17, 0x40);
  auto again = b.dev->on_datagram(wire::encode(b.request_g(wire::Command::attest, kT0 + 600, kT0 + 1)));
  EXPECT_NE(*again.reply, "OK ATTEST " + expected->hex());
}

TEST(GeneralDeviceService, SealedResponsesOpenUnderSessionKey) {
  Bench b(DeviceType::general);
  b.profile.rot.seal_responses = true;
  b.dev = std::make_unique<IotDevice>(b.profile, std::make_unique<MemoryCounterStore>(),
                                      default_memory_image("dev", 256), b.timer, b.rng);
  b.sync(kT0);
  auto ev = b.dev->on_datagram(wire::encode(b.request_g(wire::Command::led_on, kT0 + 600, kT0)));
  ASSERT_EQ(ev.reply->rfind("SEALED ", 0), 0u);
  auto f = wire::ticket_fields_g(nid(101), b.addr, kT0 + 600, nid(7));
  auto k = crypto::make_session_key_g(b.kl_key, f.id_c, f.ad_c, f.nonce, f.id_dev);
  auto raw = base64_decode(ev.reply->substr(7));
  auto box = crypto::SealedBox::parse(*raw);
  EXPECT_EQ(kesic::to_string(*crypto::open(*k, *box)), "OK LED_ON");
}

TEST(GeneralDeviceService, IgnoresPowerConstrainedFrames) {
  Bench b(DeviceType::general);
  b.sync(kT0);
  auto ev = b.dev->on_datagram(wire::encode(b.request_pc(wire::Command::led_on, 1)));
  EXPECT_EQ(ev.verdict->outcome, Outcome::invalid_request);
  EXPECT_EQ(ev.status.code(), Errc::LengthMismatch);
}

// ---------------------------------------------------------------- Dev_pc

TEST(PowerConstrainedDevice, WakeSetsWindowBase) {
  Bench b(DeviceType::power_constrained);
  b.sync(kT0);
  ASSERT_TRUE(b.dev->window());
  EXPECT_EQ(b.dev->window()->first, static_cast<std::uint64_t>(kT0));
  EXPECT_EQ(b.dev->window()->second, 16u);
}

TEST(PowerConstrainedDevice, AttestRequestWithBadMacIsIgnored) {
  Bench b(DeviceType::power_constrained);
  ASSERT_TRUE(b.dev->start_sync().ok());
  auto frame = b.attest_request(wire::Challenge::generate(b.rng));
  frame[frame.size() - 1] = frame.back() == 'a' ? 'b' : 'a';
  auto ev = b.dev->on_datagram(frame);
  EXPECT_EQ(ev.status.code(), Errc::AuthFailure);
  EXPECT_FALSE(ev.reply);
}

TEST(PowerConstrainedDevice, AttestResponseMatchesVerifier) {
  Bench b(DeviceType::power_constrained);
  ASSERT_TRUE(b.dev->start_sync().ok());
  auto c = wire::Challenge::generate(b.rng);
  auto ev = b.dev->on_datagram(b.attest_request(c));
  ASSERT_TRUE(ev.reply);
  EXPECT_EQ(ev.reply_to, ReplyTo::isv_attest);
  auto resp = wire::decode_attest_response(*ev.reply);
  auto k = crypto::derive_attestation_key(b.kl_key, c.text());
  auto expected = crypto::attest_digest(*k, crypto::sha256(default_memory_image("dev", 256)));
  EXPECT_TRUE(crypto::tags_equal(expected, resp->attst_hmac));
}

TEST(PowerConstrainedDevice, NoServiceWithoutSync) {
  Bench b(DeviceType::power_constrained);
  EXPECT_EQ(b.send(wire::encode(b.request_pc(wire::Command::led_on, kT0 + 1))),
            Outcome::invalid_request);
}

TEST(PowerConstrainedDevice, OutOfOrderRedemption) {
  Bench b(DeviceType::power_constrained);
  b.sync(kT0);
  auto third = wire::encode(b.request_pc(wire::Command::led_on, kT0 + 3));
  auto first = wire::encode(b.request_pc(wire::Command::led_off, kT0 + 1));
  EXPECT_EQ(b.send(third), Outcome::accept);
  EXPECT_EQ(b.send(first), Outcome::accept);
  EXPECT_EQ(b.send(third), Outcome::invalid_counter);
}

TEST(PowerConstrainedDevice, WindowEdges) {
  Bench b(DeviceType::power_constrained, 4);
  b.sync(kT0);
  EXPECT_EQ(b.send(wire::encode(b.request_pc(wire::Command::led_on, kT0))), Outcome::invalid_counter);
  EXPECT_EQ(b.send(wire::encode(b.request_pc(wire::Command::led_on, kT0 + 5))),
            Outcome::invalid_counter);
  EXPECT_EQ(b.send(wire::encode(b.request_pc(wire::Command::led_on, kT0 + 4))), Outcome::accept);
}

TEST(PowerConstrainedDevice, ForgedTicketDoesNotBurnSlot) {
  Bench b(DeviceType::power_constrained);
  b.sync(kT0);
  auto req = b.request_pc(wire::Command::led_on, kT0 + 2);
  auto forged = req;
  forged.ticket = crypto::hmac(b.kl_key, "forged");
  EXPECT_EQ(b.send(wire::encode(forged)), Outcome::auth_failure);
  EXPECT_EQ(b.send(wire::encode(req)), Outcome::accept);
}

TEST(PowerConstrainedDevice, AttestCommandIsInvalid) {
  Bench b(DeviceType::power_constrained);
  b.sync(kT0);
  EXPECT_EQ(b.send(wire::encode(b.request_pc(wire::Command::attest, kT0 + 1))),
            Outcome::invalid_request);
}

TEST(PowerConstrainedDevice, SleepDropsTrafficAndWindow) {
  Bench b(DeviceType::power_constrained);
  b.sync(kT0);
  b.dev->sleep();
  auto ev = b.dev->on_datagram(wire::encode(b.request_pc(wire::Command::led_on, kT0 + 1)));
  EXPECT_EQ(ev.status.code(), Errc::DeviceAsleep);
  EXPECT_FALSE(ev.reply);
  b.dev->wake();
  EXPECT_FALSE(b.dev->synced());
}

// All 24 orders of four tickets in a window of four: each accepted once.
TEST(PowerConstrainedDevice, EveryPermutationAcceptsEachTicketOnce) {
  std::vector<int> order{1, 2, 3, 4};
  int permutations = 0;
  do {
    Bench b(DeviceType::power_constrained, 4);
    b.sync(kT0);
    for (int k : order) {
      EXPECT_EQ(b.send(wire::encode(b.request_pc(wire::Command::led_on, kT0 + k))),
                Outcome::accept);
    }
    for (int k : order) {
      EXPECT_EQ(b.send(wire::encode(b.request_pc(wire::Command::led_on, kT0 + k))),
                Outcome::invalid_counter);
    }
    ++permutations;
  } while (std::next_permutation(order.begin(), order.end()));
  EXPECT_EQ(permutations, 24);
}

// Random presentation sequences: accepted co_pc values are unique and in
// (base, base+n].
TEST(PowerConstrainedDevice, AcceptedCountersAreUniqueAndInWindow) {
  std::mt19937 gen(3);
  for (int round = 0; round < 20; ++round) {
    Bench b(DeviceType::power_constrained, 8);
    b.sync(kT0);
    std::multiset<std::uint64_t> accepted;
    for (int i = 0; i < 40; ++i) {
      std::uint64_t co_pc = kT0 - 2 + gen() % 14;
      if (b.send(wire::encode(b.request_pc(wire::Command::led_on, co_pc))) == Outcome::accept) {
        accepted.insert(co_pc);
      }
    }
    for (auto c : accepted) {
      EXPECT_EQ(accepted.count(c), 1u);
      EXPECT_GT(c, static_cast<std::uint64_t>(kT0));
      EXPECT_LE(c, static_cast<std::uint64_t>(kT0) + 8);
    }
  }
}

// ---------------------------------------------------------------- API surface

// The secure state is reachable only through the RoT's protocol entry points.
template <typename T>
concept ExposesKeys = requires(T& t) { t.keys(); } || requires(T& t) { t.kl_sync(); } ||
                      requires(T& t) { t.kl_tkt(); } || requires(T& t) { t.kl_key(); } ||
                      requires(T& t) { t.keys_; } || requires(T& t) { t.session_key(); };

template <typename T>
concept WritesSecureState = requires(T& t) { t.set_co_sync(1u); } ||
                            requires(T& t) { t.set_start_time(Timestamp{}); } ||
                            requires(T& t) { t.set_window(1u); } ||
                            requires(T& t) { t.rot(); } || requires(T& t) { t.rot_; } ||
                            requires(T& t) { t.counter_; };

TEST(DeviceApiAudit, SecureStateIsNotReachable) {
  static_assert(!ExposesKeys<RootOfTrust>);
  static_assert(!ExposesKeys<IotDevice>);
  static_assert(!WritesSecureState<RootOfTrust>);
  static_assert(!WritesSecureState<IotDevice>);
  static_assert(!std::is_copy_constructible_v<RootOfTrust>);
  SUCCEED();
}

TEST(DeviceProfileTest, JsonRoundTrip) {
  Bench b(DeviceType::power_constrained, 4);
  auto back = DeviceProfile::from_json(b.profile.to_json());
  ASSERT_TRUE(back.ok()) << back.error().message();
  EXPECT_EQ(back->to_json(), b.profile.to_json());
  auto bad = b.profile.to_json();
  bad["window"] = 0;
  EXPECT_EQ(DeviceProfile::from_json(bad).code(), Errc::ParseError);
}

TEST(DeviceControl, StatusAndMutateOnlyWhenEnabled) {
  Bench b(DeviceType::general);
  auto off = b.dev->on_datagram("CTL STATUS");
  EXPECT_EQ(off.kind, "unknown");
  b.dev->enable_control(true);
  auto before = b.dev->memory();
  auto ev = b.dev->on_datagram("CTL MUTATE 3 1");
  EXPECT_EQ(Json::parse(*ev.reply).at("led"), false);
  EXPECT_NE(before, b.dev->memory());
}

TEST(DefaultImage, StableAndSized) {
  EXPECT_EQ(default_memory_image("lamp").size(), 4096u);
  EXPECT_EQ(default_memory_image("lamp"), default_memory_image("lamp"));
  EXPECT_NE(default_memory_image("lamp"), default_memory_image("sensor"));
}

}  // namespace
}  // namespace kesic::device
