// kesic-isv: IoT ticket broker (HTTP) plus the device sync and attestation
// listeners (UDP).
#include <CLI11.hpp>
#include <httplib.h>

#include <thread>

#include "daemon.hpp"
#include "kesic/isv/isv.hpp"
#include "kesic/net/udp.hpp"

using namespace kesic;
using namespace std::chrono_literals;

namespace {

using Handler = isv::SyncOutcome (isv::Isv::*)(const std::string&, std::string_view);

// Replies leave through the sync socket whichever listener got the frame;
// devices only ever hear from that one address.
void serve_udp(const char* label, const net::UdpSocket& in, const net::UdpSocket& out,
               isv::Isv& broker, Handler handler) {
  while (!tools::stopping()) {
    auto d = in.receive(200ms);
    if (!d) {
      if (d.code() != Errc::Timeout && !tools::stopping()) spdlog::warn("{} receive: {}", label, d.error().message());
      continue;
    }
    auto outcome = (broker.*handler)(d->from.render(), d->payload);
    spdlog::info("{} from {}: {}", label, d->from.render(),
                 outcome.status ? "ok" : outcome.status.error().message());
    if (!outcome.reply) continue;
    auto to = net::Endpoint::parse(outcome.reply->to);
    if (!to) {
      spdlog::warn("{}: bad reply address {}", label, outcome.reply->to);
      continue;
    }
    if (auto st = out.send_to(*to, outcome.reply->payload); !st) {
      spdlog::warn("{} send: {}", label, st.error().message());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KESIC IoT service (ticket broker and device verifier)"};
  std::string devices_path;
  std::string host = "127.0.0.1";
  std::uint16_t http_port = 8080, sync_port = 8801, attest_port = 8802;
  isv::IsvConfig cfg;
  std::string snapshot;
  std::optional<std::uint64_t> seed;
  std::string clock_file;
  app.add_option("--devices", devices_path, "registry: identity, service key, devices")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--host", host, "address to bind");
  app.add_option("--http-port", http_port, "POST /ticket");
  app.add_option("--sync-port", sync_port, "UDP SyncRequest listener");
  app.add_option("--attest-port", attest_port, "UDP AttestResponse listener");
  app.add_option("--ticket-lifetime", cfg.iot_ticket_lifetime, "Dev_g ticket lifetime, seconds");
  app.add_option("--clock-skew", cfg.clock_skew, "authenticator skew bound, seconds");
  app.add_option("--awake-period", cfg.awake_period, "Dev_pc awake period after sync, seconds");
  app.add_option("--attest-timeout", cfg.attest_timeout, "seconds to answer a challenge");
  app.add_option("--snapshot", snapshot, "counter snapshot, reloaded at start");
  app.add_option("--deterministic-seed", seed, "seeded randomness, for tests");
  app.add_option("--virtual-clock", clock_file, "read the time from this file (test mode)");
  CLI11_PARSE(app, argc, argv);

  tools::init_logging("isv");
  auto registry = isv::Registry::load(devices_path);
  if (!registry) {
    spdlog::error("{}: {}", devices_path, registry.error().message());
    return 1;
  }
  cfg.snapshot_path = snapshot;
  auto clock = make_clock(clock_file);
  auto rng = make_random(seed, "isv");
  isv::Isv broker(std::move(*registry), cfg, *clock, *rng);
  if (auto st = broker.load_snapshot(); !st) {
    spdlog::error("snapshot {}: {}", snapshot, st.error().message());
    return 1;
  }

  auto sync_sock = net::UdpSocket::bind({host, sync_port});
  auto attest_sock = net::UdpSocket::bind({host, attest_port});
  if (!sync_sock || !attest_sock) {
    spdlog::error("bind: {}", (!sync_sock ? sync_sock.error() : attest_sock.error()).message());
    return 1;
  }

  httplib::Server http;
  http.Post("/ticket", [&](const httplib::Request& req, httplib::Response& res) {
    auto reply = broker.handle_ticket(req.get_header_value("Authorization"), req.body);
    spdlog::info("ticket from {}: {}", req.remote_addr,
                 reply.status ? "ok" : reply.status.error().message());
    res.status = reply.http_status;
    res.set_content(reply.body, "application/json");
  });
  if (!http.bind_to_port(host, http_port)) {
    spdlog::error("bind http {}:{}", host, http_port);
    return 1;
  }

  tools::install_stop_handlers();
  spdlog::info("http {}:{} sync {} attest {}", host, http_port, sync_sock->local().render(),
               attest_sock->local().render());
  std::thread http_thread([&] { http.listen_after_bind(); });
  std::thread sync_thread(serve_udp, "sync", std::cref(*sync_sock), std::cref(*sync_sock),
                          std::ref(broker), &isv::Isv::handle_sync_request);
  std::thread attest_thread(serve_udp, "attest", std::cref(*attest_sock), std::cref(*sync_sock),
                            std::ref(broker), &isv::Isv::handle_attest_response);

  while (!tools::stopping()) std::this_thread::sleep_for(100ms);
  http.stop();
  http_thread.join();
  sync_thread.join();
  attest_thread.join();
  spdlog::info("stopped");
  return 0;
}
