// kesic-client: login, fetch IoT tickets, and drive devices.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <iterator>

#include "kesic/client/client.hpp"
#include "kesic/net/links.hpp"

using namespace kesic;
using namespace std::chrono_literals;

namespace {

void redact(Json& j) {
  if (j.is_object()) {
    for (auto& [k, v] : j.items()) {
      if (k == "session_key" || k == "key") v = "<redacted>";
      else redact(v);
    }
  } else if (j.is_array()) {
    for (auto& v : j) redact(v);
  }
}

int fail(const Error& e) {
  std::cerr << "error: " << to_string(e.code) << ": " << e.detail << "\n";
  return client::exit_code_for(e.code);
}

Result<Bytes> read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return make_error(Errc::IoError, "cannot read " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KESIC client"};
  app.require_subcommand(1);
  std::string config_path, cache_path = "kesic-cache.json", clock_file;
  std::string kdc_addr, isv_url;
  std::vector<std::string> device_addrs;
  std::optional<std::uint64_t> seed;
  int timeout_ms = 1000;
  app.add_option("--config", config_path, "client identity and endpoints (JSON)");
  app.add_option("--cache", cache_path, "credential cache file");
  app.add_option("--kdc-addr", kdc_addr, "KDC host:port (overrides the config)");
  app.add_option("--isv-url", isv_url, "ISV base URL (overrides the config)");
  app.add_option("--device-addr", device_addrs, "name=host:port, repeatable");
  app.add_option("--deterministic-seed", seed, "seeded randomness, for tests");
  app.add_option("--virtual-clock", clock_file, "read the time from this file (test mode)");
  app.add_option("--timeout-ms", timeout_ms, "per-request timeout");

  auto* login = app.add_subcommand("login", "AS exchange; caches the TGT");
  std::string password;
  bool password_stdin = false;
  login->add_option("--password", password, "password (else KESIC_PASSWORD or --password-stdin)");
  login->add_flag("--password-stdin", password_stdin, "read the password from stdin");

  auto* ticket = app.add_subcommand("ticket", "request an IoT ticket from the ISV");
  std::string device;
  ticket->add_option("device", device)->required();

  auto* call = app.add_subcommand("call", "send LED_ON / LED_OFF / ATTEST to a device");
  std::string cmd_text;
  bool force = false;
  call->add_option("device", device)->required();
  call->add_option("cmd", cmd_text)->required();
  call->add_flag("--force", force, "send even if the cached Dev_g ticket has expired");

  auto* attest = app.add_subcommand("attest", "verify a Dev_g's program memory");
  std::string image_path;
  attest->add_option("device", device)->required();
  attest->add_option("--image", image_path, "expected memory image")->required()->check(CLI::ExistingFile);
  attest->add_flag("--force", force, "send even if the cached Dev_g ticket has expired");

  auto* cache_cmd = app.add_subcommand("cache", "print the credential cache without keys");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : client::kExitUsage;
  }

  auto cache = client::CredentialCache::open(cache_path);
  if (!cache) return fail(cache.error());
  if (cache_cmd->parsed()) {
    Json j = cache->to_json();
    redact(j);
    std::cout << j.dump(2) << "\n";
    return client::kExitOk;
  }

  if (config_path.empty()) {
    std::cerr << "error: --config is required for " << app.get_subcommands().front()->get_name() << "\n";
    return client::kExitUsage;
  }
  auto cfg = client::ClientConfig::load(config_path);
  if (!cfg) return fail(cfg.error());
  if (!kdc_addr.empty()) cfg->kdc_addr = kdc_addr;
  if (!isv_url.empty()) cfg->isv_url = isv_url;
  for (const auto& m : device_addrs) {
    auto eq = m.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --device-addr wants name=host:port, got " << m << "\n";
      return client::kExitUsage;
    }
    cfg->device_addrs[m.substr(0, eq)] = m.substr(eq + 1);
  }
  auto kdc_ep = net::Endpoint::parse(cfg->kdc_addr);
  if (!kdc_ep) return fail(kdc_ep.error());

  std::chrono::milliseconds timeout{timeout_ms};
  net::UdpKdcLink kdc(*kdc_ep, timeout);
  net::HttpIsvLink isv(cfg->isv_url, timeout);
  net::UdpDeviceLink devices(cfg->device_addrs, timeout);
  auto clock = make_clock(clock_file);
  auto rng = make_random(seed, "client:" + cfg->name);
  client::Client sdk(*cfg, *cache, *clock, *rng, kdc, isv, devices);

  if (login->parsed()) {
    if (password.empty() && password_stdin) std::getline(std::cin, password);
    if (password.empty()) {
      if (const char* env = std::getenv("KESIC_PASSWORD")) password = env;
    }
    if (auto st = sdk.login(password); !st) return fail(st.error());
    std::cout << "logged in as " << cfg->name << "\n";
    return client::kExitOk;
  }
  if (ticket->parsed()) {
    auto r = sdk.get_iot_ticket(device);
    if (!r) return fail(r.error());
    std::cout << device << ": " << wire::to_string(r->type) << " ticket, nonce " << r->nonce << "\n";
    return client::kExitOk;
  }
  if (call->parsed()) {
    auto cmd = wire::parse_command(cmd_text);
    if (!cmd) {
      std::cerr << "error: unknown command " << cmd_text << "\n";
      return client::kExitUsage;
    }
    auto r = sdk.call_device(device, *cmd, force);
    if (!r) return fail(r.error());
    std::cout << device << ": " << device::to_string(r->outcome) << " " << r->text << "\n";
    return r->outcome == device::Outcome::accept ? client::kExitOk : client::kExitDevice;
  }
  if (attest->parsed()) {
    auto image = read_image(image_path);
    if (!image) return fail(image.error());
    auto r = sdk.verify_attestation(device, *image, force);
    if (!r) return fail(r.error());
    std::cout << device << ": " << (r->healthy ? "healthy" : "compromised") << "\n";
    return r->healthy ? client::kExitOk : client::kExitCompromised;
  }
  return client::kExitUsage;
}
