#include "kesic/harness/live.hpp"

#include <netinet/in.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fcntl.h>
#include <thread>

#include "kesic/net/links.hpp"

extern char** environ;

namespace kesic::harness {

using namespace std::chrono_literals;

namespace {

constexpr auto kStartupBudget = 5s;
constexpr auto kSyncBudget = 2s;
constexpr auto kPoll = 20ms;
constexpr auto kRequestTimeout = 500ms;

Result<std::uint16_t> free_port(int type) {
  int fd = ::socket(AF_INET, type, 0);
  if (fd < 0) return make_error(Errc::IoError, "socket");
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t len = sizeof sa;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0 ||
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len) != 0) {
    ::close(fd);
    return make_error(Errc::PortInUse, "no free port");
  }
  ::close(fd);
  return ntohs(sa.sin_port);
}

template <typename Probe>
bool wait_until(Probe probe, std::chrono::milliseconds budget) {
  auto deadline = std::chrono::steady_clock::now() + budget;
  while (std::chrono::steady_clock::now() < deadline) {
    if (probe()) return true;
    std::this_thread::sleep_for(kPoll);
  }
  return false;
}

}  // namespace

// Real links that also copy every exchange into the transcript.
struct LiveBackend::Links {
  struct Kdc final : client::KdcLink {
    Kdc(LiveBackend& b, std::string a) : live(b), addr(std::move(a)), link(b.kdc_ep_, kRequestTimeout) {}
    Result<std::string> exchange(std::string_view request) override {
      live.record(addr, "kdc", std::string(request));
      auto r = link.exchange(request);
      if (r) live.record("kdc", addr, *r);
      return r;
    }
    LiveBackend& live;
    std::string addr;
    net::UdpKdcLink link;
  };
  struct Isv final : client::IsvLink {
    Isv(LiveBackend& b, std::string a)
        : live(b), addr(std::move(a)),
          link("http://127.0.0.1:" + std::to_string(b.http_port_), kRequestTimeout) {}
    Result<client::HttpResponse> post_ticket(std::string_view authorization,
                                             std::string_view body) override {
      live.record(addr, "isv:http", Json{{"authorization", authorization}, {"body", body}}.dump());
      auto r = link.post_ticket(authorization, body);
      if (r) live.record("isv:http", addr, Json{{"status", r->status}, {"body", r->body}}.dump());
      return r;
    }
    LiveBackend& live;
    std::string addr;
    net::HttpIsvLink link;
  };
  struct Device final : client::DeviceLink {
    Device(LiveBackend& b, std::string a) : live(b), addr(std::move(a)), link(addrs(b), kRequestTimeout) {}
    static std::map<std::string, std::string> addrs(const LiveBackend& b) {
      std::map<std::string, std::string> m;
      for (const auto& [n, ep] : b.device_eps_) m[n] = ep.render();
      return m;
    }
    Result<std::string> send(const std::string& device, std::string_view frame) override {
      live.record(addr, device, std::string(frame));
      auto r = link.send(device, frame);
      if (r) live.record(device, addr, *r);
      return r;
    }
    LiveBackend& live;
    std::string addr;
    net::UdpDeviceLink link;
  };

  Links(LiveBackend& b, const std::string& addr) : kdc(b, addr), isv(b, addr), device(b, addr) {}
  Kdc kdc;
  Isv isv;
  Device device;
};

LiveBackend::LiveBackend(const Fleet& fleet, std::uint64_t seed, LiveOptions options)
    : fleet_(fleet), seed_(seed), options_(std::move(options)) {}

Result<std::unique_ptr<LiveBackend>> LiveBackend::start(const Fleet& fleet, std::uint64_t seed,
                                                        const LiveOptions& options) {
  std::unique_ptr<LiveBackend> b(new LiveBackend(fleet, seed, options));
  if (b->options_.work_dir.empty()) {
    std::string tmpl = (std::filesystem::temp_directory_path() / "kesic-live-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) return make_error(Errc::IoError, "mkdtemp");
    b->options_.work_dir = tmpl;
    b->own_work_dir_ = true;
  }
  if (b->options_.bin_dir.empty()) {
    b->options_.bin_dir = std::filesystem::read_symlink("/proc/self/exe").parent_path();
  }
  KESIC_CHECK(b->launch());
  return b;
}

LiveBackend::~LiveBackend() {
  for (auto& [name, pid] : device_pids_) stop(pid);
  stop(isv_pid_);
  stop(kdc_pid_);
  if (own_work_dir_) {
    std::error_code ec;
    std::filesystem::remove_all(options_.work_dir, ec);
  }
}

void LiveBackend::stop(pid_t& pid) {
  if (pid <= 0) return;
  ::kill(pid, SIGTERM);
  int status = 0;
  bool gone = wait_until([&] { return ::waitpid(pid, &status, WNOHANG) == pid; }, 1000ms);
  if (!gone) {
    ::kill(pid, SIGKILL);
    ::waitpid(pid, &status, 0);
  }
  pid = -1;
}

Result<pid_t> LiveBackend::spawn(const std::string& name, const std::vector<std::string>& args) {
  auto exe = options_.bin_dir / name;
  if (!std::filesystem::exists(exe)) return make_error(Errc::StartupTimeout, "missing " + exe.string());
  std::vector<std::string> argv_s{exe.string()};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);

  auto log = (options_.work_dir / (name + ".log")).string();
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, STDOUT_FILENO, log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0600);
  posix_spawn_file_actions_adddup2(&fa, STDOUT_FILENO, STDERR_FILENO);
  pid_t pid = -1;
  int rc = ::posix_spawn(&pid, argv[0], &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  if (rc != 0) return make_error(Errc::StartupTimeout, "spawn " + name + " failed");
  return pid;
}

Status LiveBackend::spawn_isv() {
  const auto& s = fleet_.spec;
  KESIC_TRY(pid, spawn("kesic-isv",
                       {"--devices", (options_.work_dir / "isv.json").string(),
                        "--http-port", std::to_string(http_port_),
                        "--sync-port", std::to_string(sync_ep_.port),
                        "--attest-port", std::to_string(attest_ep_.port),
                        "--snapshot", (options_.work_dir / "isv.snapshot").string(),
                        "--ticket-lifetime", std::to_string(s.iot_ticket_lifetime),
                        "--awake-period", std::to_string(s.awake_period),
                        "--attest-timeout", std::to_string(s.attest_timeout),
                        "--virtual-clock", clock_file_.string(),
                        "--deterministic-seed", std::to_string(seed_)}));
  isv_pid_ = pid;
  net::HttpIsvLink probe("http://127.0.0.1:" + std::to_string(http_port_), kRequestTimeout);
  if (!wait_until([&] { return probe.post_ticket("", "{}").ok(); }, kStartupBudget)) {
    return make_error(Errc::StartupTimeout, "ISV did not answer HTTP");
  }
  return ok_status();
}

Status LiveBackend::launch() {
  const auto& dir = options_.work_dir;
  KESIC_CHECK(fleet_.write(dir));
  clock_file_ = dir / "clock";
  FileClock::write(clock_file_, fleet_.spec.start_time);
  clock_ = std::make_unique<FileClock>(clock_file_);

  std::uint16_t next = options_.base_port;
  auto port = [&](int type) -> Result<std::uint16_t> {
    if (next != 0) return next++;
    return free_port(type);
  };
  KESIC_TRY(kdc_port, port(SOCK_DGRAM));
  KESIC_TRY(http_port, port(SOCK_STREAM));
  KESIC_TRY(sync_port, port(SOCK_DGRAM));
  KESIC_TRY(attest_port, port(SOCK_DGRAM));
  kdc_ep_ = net::Endpoint{"127.0.0.1", kdc_port};
  http_port_ = http_port;
  sync_ep_ = net::Endpoint{"127.0.0.1", sync_port};
  attest_ep_ = net::Endpoint{"127.0.0.1", attest_port};
  for (const auto& d : fleet_.devices) {
    KESIC_TRY(p, port(SOCK_DGRAM));
    device_eps_[d.name] = net::Endpoint{"127.0.0.1", p};
  }

  KESIC_TRY(kdc_pid, spawn("kesic-kdc", {"--db", (dir / "kdc.json").string(),
                                         "--port", std::to_string(kdc_ep_.port),
                                         "--virtual-clock", clock_file_.string(),
                                         "--deterministic-seed", std::to_string(seed_)}));
  kdc_pid_ = kdc_pid;
  if (!wait_until([&] { return net::udp_request(kdc_ep_, "{}", 100ms).ok(); }, kStartupBudget)) {
    return make_error(Errc::StartupTimeout, "KDC did not answer");
  }
  KESIC_CHECK(spawn_isv());

  for (const auto& d : fleet_.devices) {
    std::vector<std::string> args{"--profile", (dir / "devices" / (d.name + ".json")).string(),
                                  "--port", std::to_string(device_eps_[d.name].port),
                                  "--isv-addr", sync_ep_.render(),
                                  "--isv-attest-addr", attest_ep_.render(),
                                  "--virtual-clock", clock_file_.string(),
                                  "--deterministic-seed", std::to_string(seed_),
                                  "--control", "--defer-sync"};
    if (d.rot.type == wire::DeviceType::power_constrained) args.push_back("--asleep");
    KESIC_TRY(pid, spawn("kesic-device", args));
    device_pids_[d.name] = pid;
    if (!wait_until([&] { return control(d.name, "STATUS").ok(); }, kStartupBudget)) {
      return make_error(Errc::StartupTimeout, d.name + " did not answer");
    }
  }
  return ok_status();
}

void LiveBackend::record(const std::string& from, const std::string& to, std::string payload) {
  Packet p;
  p.seq = transcript_.size();
  p.sent_at = p.deliver_at = clock_->now();
  p.from = from;
  p.to = to;
  p.kind = classify(from, to, payload);
  p.payload = std::move(payload);
  p.fate = "sent";
  transcript_.push_back(std::move(p));
}

StepOutcome LiveBackend::advance(Seconds dt) {
  if (dt < 0) return outcome_of(make_error(Errc::ScriptError, "the clock only moves forward"));
  FileClock::write(clock_file_, clock_->now() + dt);
  StepOutcome out{"ok"};
  out.data = Json{{"now", clock_->now()}};
  return out;
}

Result<std::string> LiveBackend::control(const std::string& device, const std::string& verb) {
  auto it = device_eps_.find(device);
  if (it == device_eps_.end()) return make_error(Errc::ScriptError, "unknown device " + device);
  return net::udp_request(it->second, "CTL " + verb, kRequestTimeout);
}

Result<Json> LiveBackend::device_status(const std::string& device) {
  KESIC_TRY(raw, control(device, "STATUS"));
  return parse_json(raw);
}

StepOutcome LiveBackend::wait_synced(const std::string& device) {
  Json last;
  bool ok = wait_until([&] {
    auto s = device_status(device);
    if (!s) return false;
    last = *s;
    return last.value("synced", false);
  }, kSyncBudget);
  StepOutcome out = ok ? StepOutcome{"ok"} : outcome_of(make_error(Errc::Timeout, "no synchronization response"));
  if (last.is_object()) out.data = last;
  return out;
}

StepOutcome LiveBackend::boot(const std::string& device) {
  auto r = control(device, "SYNC");
  if (!r) return outcome_of(r.error());
  return wait_synced(device);
}

StepOutcome LiveBackend::retransmit(const std::string& device) {
  auto r = control(device, "RESEND");
  if (!r) return outcome_of(r.error());
  return wait_synced(device);
}

StepOutcome LiveBackend::sleep(const std::string& device) {
  auto r = control(device, "SLEEP");
  if (!r) return outcome_of(r.error());
  StepOutcome out{"ok"};
  if (auto j = parse_json(*r)) out.data = *j;
  return out;
}

StepOutcome LiveBackend::mutate(const std::string& device, std::size_t offset, std::uint8_t mask) {
  auto r = control(device, "MUTATE " + std::to_string(offset) + " " + std::to_string(mask));
  return r ? StepOutcome{"ok"} : outcome_of(r.error());
}

StepOutcome LiveBackend::stop_isv() {
  if (isv_pid_ <= 0) return outcome_of(make_error(Errc::ScriptError, "ISV already stopped"));
  stop(isv_pid_);
  return StepOutcome{"ok"};
}

StepOutcome LiveBackend::restart_isv() {
  if (isv_pid_ > 0) return outcome_of(make_error(Errc::ScriptError, "ISV is running"));
  StepOutcome out = outcome_of(spawn_isv());
  if (auto snap = read_json_file(options_.work_dir / "isv.snapshot")) out.data = *snap;
  return out;
}

client::KdcLink& LiveBackend::kdc_link(const std::string& client) {
  auto& l = links_[client];
  if (!l) l = std::make_unique<Links>(*this, "client:" + client);
  return l->kdc;
}

client::IsvLink& LiveBackend::isv_link(const std::string& client) {
  kdc_link(client);
  return links_[client]->isv;
}

client::DeviceLink& LiveBackend::device_link(const std::string& client) {
  kdc_link(client);
  return links_[client]->device;
}

}  // namespace kesic::harness
