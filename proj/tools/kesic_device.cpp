// kesic-device: one IoT device (root of trust plus LED) on a UDP port.
#include <CLI11.hpp>

#include <fstream>
#include <iterator>

#include "daemon.hpp"
#include "kesic/device/device.hpp"
#include "kesic/net/udp.hpp"

using namespace kesic;
using namespace std::chrono_literals;

namespace {

constexpr auto kResendEvery = 300ms;
constexpr int kMaxResends = 5;

Result<Bytes> read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return make_error(Errc::IoError, "cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Retransmits an unanswered SyncRequest with the same counter.
class SyncDriver {
 public:
  SyncDriver(device::IotDevice& dev, const net::UdpSocket& sock, net::Endpoint isv)
      : dev_(dev), sock_(sock), isv_(std::move(isv)) {}

  Status start() {
    dev_.wake();
    KESIC_TRY(frame, dev_.start_sync());
    pending_ = true;
    resends_ = 0;
    return send(frame);
  }
  Status resend() {
    KESIC_TRY(frame, dev_.retransmit_sync());
    pending_ = true;
    return send(frame);
  }
  void tick() {
    if (!pending_ || dev_.synced()) {
      pending_ = false;
      return;
    }
    if (std::chrono::steady_clock::now() - last_ < kResendEvery) return;
    if (resends_ >= kMaxResends) {
      spdlog::warn("sync unanswered after {} resends", resends_);
      pending_ = false;
      return;
    }
    ++resends_;
    if (auto st = resend(); !st) spdlog::warn("resend: {}", st.error().message());
  }

 private:
  Status send(const std::string& frame) {
    last_ = std::chrono::steady_clock::now();
    spdlog::info("sync request co_sync={}", dev_.co_sync());
    return sock_.send_to(isv_, frame);
  }

  device::IotDevice& dev_;
  const net::UdpSocket& sock_;
  net::Endpoint isv_;
  bool pending_ = false;
  int resends_ = 0;
  std::chrono::steady_clock::time_point last_{};
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KESIC IoT device"};
  std::string profile_path, memory_image, clock_file;
  std::string host = "127.0.0.1";
  std::uint16_t port = 9000;
  std::string isv_addr = "127.0.0.1:8801";
  std::string isv_attest_addr;
  bool control = false, asleep = false, defer_sync = false;
  std::optional<std::uint64_t> seed;
  app.add_option("--profile", profile_path, "device provisioning file")->required()->check(CLI::ExistingFile);
  app.add_option("--host", host, "address to bind");
  app.add_option("--port", port, "UDP port");
  app.add_option("--isv-addr", isv_addr, "ISV sync listener, host:port");
  app.add_option("--isv-attest-addr", isv_attest_addr, "ISV attestation listener (default: sync port + 1)");
  app.add_option("--memory-image", memory_image, "program memory image (overrides the profile)");
  app.add_option("--virtual-clock", clock_file, "read the time from this file (test mode)");
  app.add_flag("--control", control, "accept CTL datagrams (test mode)");
  app.add_flag("--asleep", asleep, "start asleep (Dev_pc)");
  app.add_flag("--defer-sync", defer_sync, "do not sync at start; wait for CTL SYNC");
  app.add_option("--deterministic-seed", seed, "seeded randomness, for tests");
  CLI11_PARSE(app, argc, argv);

  auto profile = device::DeviceProfile::load(profile_path);
  if (!profile) {
    std::fprintf(stderr, "%s: %s\n", profile_path.c_str(), profile.error().message().c_str());
    return 1;
  }
  tools::init_logging(profile->name);

  auto isv = net::Endpoint::parse(isv_addr);
  if (!isv) {
    spdlog::error("--isv-addr: {}", isv.error().message());
    return 1;
  }
  net::Endpoint attest_ep{isv->host, static_cast<std::uint16_t>(isv->port + 1)};
  if (!isv_attest_addr.empty()) {
    auto a = net::Endpoint::parse(isv_attest_addr);
    if (!a) {
      spdlog::error("--isv-attest-addr: {}", a.error().message());
      return 1;
    }
    attest_ep = *a;
  }

  std::filesystem::path image_path = memory_image.empty() ? profile->memory_image : std::filesystem::path(memory_image);
  Bytes memory;
  if (image_path.empty()) {
    memory = device::default_memory_image(profile->name);
  } else if (auto img = read_image(image_path)) {
    memory = std::move(*img);
  } else {
    spdlog::error("{}", img.error().message());
    return 1;
  }

  std::unique_ptr<device::CounterStore> counter;
  if (profile->counter_file.empty()) {
    counter = std::make_unique<device::MemoryCounterStore>();
  } else {
    counter = std::make_unique<device::FileCounterStore>(profile->counter_file);
  }
  auto clock = make_clock(clock_file);
  auto rng = make_random(seed, "device:" + profile->name);
  device::IotDevice dev(*profile, std::move(counter), std::move(memory), *clock, *rng);
  dev.enable_control(control);

  auto sock = net::UdpSocket::bind({host, port});
  if (!sock) {
    spdlog::error("bind {}:{}: {}", host, port, sock.error().message());
    return 1;
  }
  tools::install_stop_handlers();
  spdlog::info("listening on {}", sock->local().render());

  SyncDriver sync(dev, *sock, *isv);
  if (asleep) {
    dev.sleep();
  } else if (!defer_sync) {
    if (auto st = sync.start(); !st) spdlog::warn("boot sync: {}", st.error().message());
  }

  while (!tools::stopping()) {
    sync.tick();
    auto d = sock->receive(50ms);
    if (!d) {
      if (d.code() != Errc::Timeout && !tools::stopping()) spdlog::warn("receive: {}", d.error().message());
      continue;
    }
    if (control && (d->payload == "CTL SYNC" || d->payload == "CTL RESEND")) {
      auto st = d->payload == "CTL SYNC" ? sync.start() : sync.resend();
      Json reply = dev.status();
      if (!st) reply["error"] = st.error().message();
      (void)sock->send_to(d->from, reply.dump());
      continue;
    }
    auto ev = dev.on_datagram(d->payload);
    if (ev.verdict) {
      spdlog::info("{} from {}: {} {}", ev.kind, d->from.render(), device::to_string(ev.verdict->outcome),
                   ev.verdict->reason);
    } else if (ev.kind != "control") {
      spdlog::info("{} from {}: {}", ev.kind, d->from.render(),
                   ev.status ? "ok" : ev.status.error().message());
    }
    if (!ev.reply) continue;
    const auto& to = ev.reply_to == device::ReplyTo::isv_attest ? attest_ep : d->from;
    if (auto st = sock->send_to(to, *ev.reply); !st) spdlog::warn("send: {}", st.error().message());
  }
  spdlog::info("stopped");
  return 0;
}
