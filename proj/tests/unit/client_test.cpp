#include "kesic/client/client.hpp"

#include <filesystem>
#include <sys/stat.h>

#include <gtest/gtest.h>

#include "kesic/device/device.hpp"
#include "kesic/isv/isv.hpp"
#include "kesic/kdc/kdc.hpp"

namespace kesic::client {
namespace {

using crypto::KeyRole;
constexpr Timestamp kT0 = 1'700'000'000;

struct FakeKdc : KdcLink {
  explicit FakeKdc(kdc::Kdc& k) : kdc(k) {}
  Result<std::string> exchange(std::string_view request) override {
    ++calls;
    return kdc.handle(request).body;
  }
  kdc::Kdc& kdc;
  int calls = 0;
};

struct FakeIsv : IsvLink {
  explicit FakeIsv(isv::Isv& i) : isv(i) {}
  Result<HttpResponse> post_ticket(std::string_view authorization, std::string_view body) override {
    auto r = isv.handle_ticket(authorization, body);
    return HttpResponse{r.http_status, r.body};
  }
  isv::Isv& isv;
};

// Routes frames to in-process devices; the ISV sync/attest legs are pumped
// inline so a wake finishes inside one call.
struct FakeDevices : DeviceLink {
  Result<std::string> send(const std::string& name, std::string_view frame) override {
    if (drop_next > 0) {
      --drop_next;
      return make_error(Errc::Timeout, name);
    }
    last_frame = std::string(frame);
    auto ev = devices.at(name)->on_datagram(frame);
    if (!ev.reply) return make_error(Errc::Timeout, name);
    return *ev.reply;
  }
  std::map<std::string, device::IotDevice*> devices;
  int drop_next = 0;
  std::string last_frame;
};

class ClientTest : public ::testing::Test {
 protected:
  ClientTest() : rng_(23), clock_(kT0) {
    auto key = [&](KeyRole r) { return SymmetricKey::generate(rng_, r); };
    auto isv_key = key(KeyRole::service);
    kdc::PrincipalDb db(key(KeyRole::service));
    EXPECT_TRUE(db.add_client("alice", "alice-pw", {"isv"}).ok());
    db.add_service("isv", isv_key);
    kdc_ = std::make_unique<kdc::Kdc>(std::move(db), kdc::KdcConfig{}, clock_, rng_);

    Json devices = Json::array();
    for (auto [name, id, type] : {std::tuple{"lamp", "00000007", "general"},
                                  std::tuple{"sensor", "00000008", "power-constrained"}}) {
      device::DeviceProfile p;
      p.name = name;
      p.rot.id = *wire::NumericId::parse(id);
      p.rot.isv_id = *wire::NumericId::parse("00000001");
      p.rot.type = *wire::parse_device_type(type);
      p.rot.window = 4;
      p.kl_sync_hex = key(KeyRole::lt_sync).hex();
      p.kl_tkt_hex = key(KeyRole::lt_ticket).hex();
      p.kl_key_hex = key(KeyRole::lt_sesskey).hex();
      auto image = device::default_memory_image(name);
      devices.push_back(Json{{"name", name},
                             {"id", id},
                             {"type", type},
                             {"allow", {"alice"}},
                             {"kl_sync", p.kl_sync_hex},
                             {"kl_tkt", p.kl_tkt_hex},
                             {"kl_key", p.kl_key_hex},
                             {"window", 4},
                             {"reference_sha256", to_hex(crypto::sha256(image))}});
      iot_[name] = std::make_unique<device::IotDevice>(
          p, std::make_unique<device::MemoryCounterStore>(), image, clock_, rng_);
      link_devices_.devices[name] = iot_[name].get();
    }
    Json reg{{"isv", {{"id", "00000001"}, {"service_id", "isv"}, {"service_key", isv_key.hex()}}},
             {"clients", {{"alice", "00000101"}}},
             {"devices", devices}};
    isv_ = std::make_unique<isv::Isv>(isv::Registry::from_json(reg).value(), isv::IsvConfig{},
                                      clock_, rng_);
    link_kdc_ = std::make_unique<FakeKdc>(*kdc_);
    link_isv_ = std::make_unique<FakeIsv>(*isv_);

    config_.name = "alice";
    config_.id_c = *wire::NumericId::parse("00000101");
    config_.ad_c = *wire::Address::from_ipv4("10.0.0.2");
    client_ = std::make_unique<Client>(config_, cache_, clock_, rng_, *link_kdc_, *link_isv_,
                                       link_devices_);
  }

  // Boot or wake a device through the ISV.
  void sync(const std::string& name) {
    auto& dev = *iot_.at(name);
    auto out = isv_->handle_sync_request(name, *dev.start_sync());
    ASSERT_TRUE(out.status.ok()) << out.status.error().message();
    auto ev = dev.on_datagram(out.reply->payload);
    if (ev.reply_to == device::ReplyTo::isv_attest) {
      auto done = isv_->handle_attest_response(name, *ev.reply);
      ASSERT_TRUE(done.status.ok()) << done.status.error().message();
      ev = dev.on_datagram(done.reply->payload);
    }
    ASSERT_TRUE(ev.status.ok()) << ev.status.error().message();
    ASSERT_TRUE(dev.synced());
  }

  SeededRandom rng_;
  VirtualClock clock_;
  std::unique_ptr<kdc::Kdc> kdc_;
  std::unique_ptr<isv::Isv> isv_;
  std::map<std::string, std::unique_ptr<device::IotDevice>> iot_;
  std::unique_ptr<FakeKdc> link_kdc_;
  std::unique_ptr<FakeIsv> link_isv_;
  FakeDevices link_devices_;
  ClientConfig config_;
  CredentialCache cache_;
  std::unique_ptr<Client> client_;
};

TEST_F(ClientTest, WrongPasswordLeavesCacheEmpty) {
  auto st = client_->login("nope");
  EXPECT_EQ(st.code(), Errc::AuthFailure);
  EXPECT_FALSE(cache_.tgt.has_value());
  EXPECT_TRUE(cache_.principal.empty());
  EXPECT_EQ(exit_code_for(st.code()), kExitAuth);
}

TEST_F(ClientTest, GeneralDeviceLedOn) {
  sync("lamp");
  ASSERT_TRUE(client_->login("alice-pw").ok());
  auto entry = client_->get_iot_ticket("lamp");
  ASSERT_TRUE(entry.ok()) << entry.error().message();
  EXPECT_EQ(entry->type, wire::DeviceType::general);
  EXPECT_EQ(entry->lifetime(), kT0 + 600);

  auto reply = client_->call_device("lamp", wire::Command::led_on);
  ASSERT_TRUE(reply.ok()) << reply.error().message();
  EXPECT_EQ(reply->outcome, device::Outcome::accept);
  EXPECT_EQ(reply->text, "OK LED_ON");
  EXPECT_TRUE(iot_["lamp"]->led());
}

TEST_F(ClientTest, ServiceTicketIsReused) {
  sync("lamp");
  ASSERT_TRUE(client_->login("alice-pw").ok());
  ASSERT_TRUE(client_->get_iot_ticket("lamp").ok());
  ASSERT_TRUE(client_->get_iot_ticket("lamp").ok());
  EXPECT_EQ(link_kdc_->calls, 2);  // AS + one TGS
}

TEST_F(ClientTest, RepeatedCallsUseDistinctTimestamps) {
  sync("lamp");
  ASSERT_TRUE(client_->login("alice-pw").ok());
  ASSERT_TRUE(client_->get_iot_ticket("lamp").ok());
  for (int i = 0; i < 5; ++i) {
    auto r = client_->call_device("lamp", i % 2 ? wire::Command::led_off : wire::Command::led_on);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r->outcome, device::Outcome::accept) << i;
  }
}

TEST_F(ClientTest, RetriesAfterLostDatagram) {
  sync("lamp");
  ASSERT_TRUE(client_->login("alice-pw").ok());
  ASSERT_TRUE(client_->get_iot_ticket("lamp").ok());
  link_devices_.drop_next = 2;
  auto r = client_->call_device("lamp", wire::Command::led_on);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->outcome, device::Outcome::accept);

  link_devices_.drop_next = 3;
  EXPECT_EQ(client_->call_device("lamp", wire::Command::led_on).code(), Errc::Timeout);
  EXPECT_EQ(exit_code_for(Errc::Timeout), kExitTransport);
}

TEST_F(ClientTest, ExpiredTicketRefusedLocallyUnlessForced) {
  sync("lamp");
  ASSERT_TRUE(client_->login("alice-pw").ok());
  ASSERT_TRUE(client_->get_iot_ticket("lamp").ok());
  clock_.advance(601);
  link_devices_.last_frame.clear();
  EXPECT_EQ(client_->call_device("lamp", wire::Command::led_on).code(), Errc::TicketExpired);
  EXPECT_TRUE(link_devices_.last_frame.empty());

  auto forced = client_->call_device("lamp", wire::Command::led_on, /*force=*/true);
  ASSERT_TRUE(forced.ok());
  EXPECT_EQ(forced->outcome, device::Outcome::ticket_expired);
  EXPECT_FALSE(iot_["lamp"]->led());
}

TEST_F(ClientTest, PowerConstrainedEntryIsSingleUse) {
  sync("sensor");
  ASSERT_TRUE(client_->login("alice-pw").ok());
  auto entry = client_->get_iot_ticket("sensor");
  ASSERT_TRUE(entry.ok()) << entry.error().message();
  EXPECT_EQ(entry->type, wire::DeviceType::power_constrained);
  DeviceEntry copy = *entry;

  auto first = client_->call_device("sensor", wire::Command::led_on);
  ASSERT_TRUE(first.ok());
  EXPECT_EQ(first->outcome, device::Outcome::accept);
  EXPECT_EQ(cache_.devices.count("sensor"), 0u);
  EXPECT_EQ(client_->call_device("sensor", wire::Command::led_on).code(), Errc::TicketExpired);

  // Presenting the consumed grant again is a replay.
  auto again = client_->present("sensor", copy, wire::Command::led_on);
  ASSERT_TRUE(again.ok());
  EXPECT_EQ(again->outcome, device::Outcome::invalid_counter);
}

TEST_F(ClientTest, PowerConstrainedNotRetried) {
  sync("sensor");
  ASSERT_TRUE(client_->login("alice-pw").ok());
  ASSERT_TRUE(client_->get_iot_ticket("sensor").ok());
  link_devices_.drop_next = 1;
  EXPECT_EQ(client_->call_device("sensor", wire::Command::led_on).code(), Errc::Timeout);
  // Kept: the device may never have seen it.
  EXPECT_EQ(cache_.devices.count("sensor"), 1u);
  auto r = client_->call_device("sensor", wire::Command::led_on);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->outcome, device::Outcome::accept);
}

TEST_F(ClientTest, AsleepDeviceReportedAsPolicyError) {
  ASSERT_TRUE(client_->login("alice-pw").ok());
  auto r = client_->get_iot_ticket("sensor");
  EXPECT_EQ(r.code(), Errc::DeviceAsleep);
  EXPECT_EQ(exit_code_for(r.code()), kExitPolicy);
}

TEST_F(ClientTest, UnknownDeviceAndNoLogin) {
  EXPECT_EQ(client_->get_iot_ticket("lamp").code(), Errc::TicketExpired);
  ASSERT_TRUE(client_->login("alice-pw").ok());
  EXPECT_EQ(client_->get_iot_ticket("toaster").code(), Errc::UnknownDevice);
}

TEST_F(ClientTest, AttestationHealthyThenCompromised) {
  sync("lamp");
  ASSERT_TRUE(client_->login("alice-pw").ok());
  ASSERT_TRUE(client_->get_iot_ticket("lamp").ok());
  auto image = device::default_memory_image("lamp");
  auto good = client_->verify_attestation("lamp", image);
  ASSERT_TRUE(good.ok()) << good.error().message();
  EXPECT_TRUE(good->healthy);

  iot_["lamp"]->mutate_memory(100, 0x01);
  auto bad = client_->verify_attestation("lamp", image);
  ASSERT_TRUE(bad.ok());
  EXPECT_FALSE(bad->healthy);
}

TEST_F(ClientTest, AttestationRejectedByDevice) {
  sync("lamp");
  ASSERT_TRUE(client_->login("alice-pw").ok());
  ASSERT_TRUE(client_->get_iot_ticket("lamp").ok());
  clock_.advance(601);
  auto r = client_->verify_attestation("lamp", device::default_memory_image("lamp"), true);
  EXPECT_EQ(r.code(), Errc::DeviceRejected);
  EXPECT_EQ(r.error().message().find("ticket-expired") != std::string::npos, true);
  EXPECT_EQ(exit_code_for(r.code()), kExitDevice);
}

TEST_F(ClientTest, CacheFileRoundTripIsOwnerOnly) {
  auto dir = std::filesystem::temp_directory_path() / "kesic_client_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto path = dir / "cache.json";

  auto cache = CredentialCache::open(path);
  ASSERT_TRUE(cache.ok());
  Client c(config_, *cache, clock_, rng_, *link_kdc_, *link_isv_, link_devices_);
  sync("lamp");
  ASSERT_TRUE(c.login("alice-pw").ok());
  ASSERT_TRUE(c.get_iot_ticket("lamp").ok());

  struct stat st {};
  ASSERT_EQ(::stat(path.c_str(), &st), 0);
  EXPECT_EQ(st.st_mode & 0777, 0600);

  auto reopened = CredentialCache::open(path);
  ASSERT_TRUE(reopened.ok());
  EXPECT_EQ(reopened->to_json(), cache->to_json());
  EXPECT_EQ(reopened->devices.at("lamp").lifetime(), kT0 + 600);
  std::filesystem::remove_all(dir);
}

TEST_F(ClientTest, PurgeDropsOnlyKerberosCredentials) {
  sync("lamp");
  ASSERT_TRUE(client_->login("alice-pw").ok());
  ASSERT_TRUE(client_->get_iot_ticket("lamp").ok());
  cache_.purge(kT0 + 36000);
  EXPECT_FALSE(cache_.tgt.has_value());
  EXPECT_TRUE(cache_.services.empty());
  EXPECT_EQ(cache_.devices.size(), 1u);
}

TEST_F(ClientTest, SealedResponsesOpen) {
  SeededRandom r(1);
  auto k = SymmetricKey::generate(r, KeyRole::session);
  auto box = crypto::seal(k, as_bytes("OK LED_ON"), r);
  auto reply = parse_device_reply("SEALED " + base64_encode(box.serialize()), k);
  ASSERT_TRUE(reply.ok());
  EXPECT_EQ(reply->text, "OK LED_ON");
  auto other = SymmetricKey::generate(r, KeyRole::session);
  EXPECT_FALSE(parse_device_reply("SEALED " + base64_encode(box.serialize()), other).ok());
  EXPECT_EQ(parse_device_reply("Invalid Counter", k)->outcome, device::Outcome::invalid_counter);
  EXPECT_FALSE(parse_device_reply("???", k).ok());
}

TEST(ClientConfigTest, ParsesJson) {
  auto c = ClientConfig::from_json(Json{{"name", "alice"},
                                        {"id", "00000101"},
                                        {"address", "10.0.0.2"},
                                        {"kdc", "127.0.0.1:7500"},
                                        {"devices", {{"lamp", "127.0.0.1:7701"}}}});
  ASSERT_TRUE(c.ok()) << c.error().message();
  EXPECT_EQ(c->ad_c.render(), wire::Address::from_ipv4("10.0.0.2")->render());
  EXPECT_EQ(c->device_addrs.at("lamp"), "127.0.0.1:7701");
  EXPECT_EQ(ClientConfig::from_json(Json{{"name", "x"}}).code(), Errc::ParseError);
}

}  // namespace
}  // namespace kesic::client
