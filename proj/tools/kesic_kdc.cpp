// kesic-kdc: Kerberos AS/TGS over UDP, one JSON request per datagram.
#include <CLI11.hpp>

#include "daemon.hpp"
#include "kesic/kdc/kdc.hpp"
#include "kesic/net/udp.hpp"

using namespace kesic;
using namespace std::chrono_literals;

int main(int argc, char** argv) {
  CLI::App app{"KESIC key distribution center"};
  std::string db_path;
  std::string host = "127.0.0.1";
  std::uint16_t port = 8800;
  kdc::KdcConfig cfg;
  std::optional<std::uint64_t> seed;
  std::string clock_file;
  app.add_option("--db", db_path, "principal database (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--host", host, "address to bind");
  app.add_option("--port", port, "UDP port");
  app.add_option("--clock-skew", cfg.clock_skew, "authenticator skew bound, seconds");
  app.add_option("--tgt-lifetime", cfg.tgt_lifetime, "seconds");
  app.add_option("--ticket-lifetime", cfg.ticket_lifetime, "service ticket lifetime, seconds");
  app.add_option("--deterministic-seed", seed, "seeded randomness, for tests");
  app.add_option("--virtual-clock", clock_file, "read the time from this file (test mode)");
  CLI11_PARSE(app, argc, argv);

  tools::init_logging("kdc");
  auto db = kdc::PrincipalDb::load(db_path);
  if (!db) {
    spdlog::error("{}: {}", db_path, db.error().message());
    return 1;
  }
  auto clock = make_clock(clock_file);
  auto rng = make_random(seed, "kdc");
  kdc::Kdc center(std::move(*db), cfg, *clock, *rng);

  auto sock = net::UdpSocket::bind({host, port});
  if (!sock) {
    spdlog::error("bind {}:{}: {}", host, port, sock.error().message());
    return 1;
  }
  tools::install_stop_handlers();
  spdlog::info("listening on {}", sock->local().render());

  while (!tools::stopping()) {
    auto d = sock->receive(200ms);
    if (!d) {
      if (d.code() != Errc::Timeout && !tools::stopping()) spdlog::warn("receive: {}", d.error().message());
      continue;
    }
    auto reply = center.handle(d->payload);
    if (reply.status) {
      spdlog::info("{} ok", d->from.render());
    } else {
      spdlog::info("{} {}", d->from.render(), reply.status.error().message());
    }
    if (auto st = sock->send_to(d->from, reply.body); !st) spdlog::warn("send: {}", st.error().message());
  }
  spdlog::info("stopped");
  return 0;
}
