#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kesic/common/clock.hpp"
#include "kesic/common/json_io.hpp"
#include "kesic/common/random.hpp"
#include "kesic/wire/frames.hpp"

namespace kesic::harness {

// Adversary rule on a link. `from`, `to` and `kind` match exactly, "*"
// matches anything, and a trailing "*" matches a prefix.
struct LinkHook {
  enum class Action { drop, delay, duplicate, tamper };
  Action action = Action::drop;
  std::string from = "*";
  std::string to = "*";
  std::string kind = "*";
  double probability = 1.0;
  Seconds delay = 0;
  std::size_t offset = 0;
  std::uint8_t xor_mask = 0x01;
  bool hex = false;    // keep hex digits hex, so the frame still parses
  int remaining = -1;  // -1: unlimited

  static Result<LinkHook> from_json(const Json& j);
  Json to_json() const;
};

// One recorded datagram, as an eavesdropper on the wire sees it.
struct Packet {
  std::uint64_t seq = 0;
  Timestamp sent_at = 0;
  Timestamp deliver_at = 0;
  std::string from;
  std::string to;
  std::string kind;
  std::string payload;
  std::string fate = "queued";  // queued, delivered, dropped, unreachable
  std::vector<std::string> hooks;  // adversary actions applied
  bool injected = false;
  std::optional<std::uint64_t> copy_of;
  // Filled in by whoever handled the packet.
  std::string verdict;
  std::string reason;

  Json to_json() const;
};

// Harness names for fixed frames: "sync_request", "service_request_pc", ...
std::string_view packet_kind(wire::FrameKind kind);
std::optional<wire::FrameKind> frame_kind(std::string_view kind);

// XORs one byte. With `hex` a lowercase hex digit maps to another hex digit.
char tamper_char(char c, std::uint8_t mask, bool hex);

// Classifies a payload from its endpoints and shape.
std::string classify(std::string_view from, std::string_view to, std::string_view payload);
// Eavesdropper rendering: decoded fixed frames, JSON text otherwise.
std::string eavesdrop_view(const Packet& p);

// Deterministic datagram network. Time only moves when the shared clock is
// advanced; without hooks delivery is reliable and FIFO.
class VirtualTransport {
 public:
  VirtualTransport(const Clock& clock, std::uint64_t seed);

  void add_hook(LinkHook hook) { hooks_.push_back(std::move(hook)); }
  void clear_hooks() { hooks_.clear(); }

  // Records and queues; returns the sequence number of the original.
  std::uint64_t send(const std::string& from, const std::string& to, std::string payload,
                     bool injected = false);
  // Pops the next packet due by now, in (deliver_at, seq) order.
  std::optional<std::uint64_t> next_ready();

  Packet& packet(std::uint64_t seq) { return log_.at(seq); }
  const std::vector<Packet>& log() const { return log_; }
  // Most recent packet matching the filters; nth counts back from the end
  // (-1 = last) or forward from the start (0 = first).
  const Packet* find(std::string_view kind, std::string_view from, std::string_view to,
                     int nth) const;

 private:
  bool roll(double p);

  const Clock& clock_;
  std::unique_ptr<RandomSource> rng_;
  std::vector<LinkHook> hooks_;
  std::vector<Packet> log_;
  std::vector<std::uint64_t> queue_;
};

bool glob_match(std::string_view pattern, std::string_view value);

}  // namespace kesic::harness
