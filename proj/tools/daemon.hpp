#pragma once

#include <csignal>
#include <atomic>
#include <string>

#include <spdlog/spdlog.h>

namespace kesic::tools {

inline std::atomic<bool> g_stop{false};

inline void install_stop_handlers() {
  auto on_signal = [](int) { g_stop.store(true); };
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

inline bool stopping() { return g_stop.load(); }

// Daemons log to stderr; the harness redirects it into <work>/<name>.log.
inline void init_logging(const std::string& name) {
  spdlog::set_pattern("%Y-%m-%dT%H:%M:%S.%e " + name + " %l %v");
  spdlog::flush_on(spdlog::level::info);
}

}  // namespace kesic::tools
