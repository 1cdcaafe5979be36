#pragma once

// Secure half of an emulated device. Keys, the sync counter, the synced
// clock and the Dev_pc counter window live here and nowhere else; the
// non-secure half only sees frames in and verdicts out.

#include <bitset>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "kesic/common/clock.hpp"
#include "kesic/common/random.hpp"
#include "kesic/crypto/crypto.hpp"
#include "kesic/wire/frames.hpp"

namespace kesic::device {

using crypto::SymmetricKey;

// Persistent home of co_sync.
class CounterStore {
 public:
  virtual ~CounterStore() = default;
  virtual std::uint64_t load() const = 0;
  virtual Status store(std::uint64_t value) = 0;
};

class MemoryCounterStore final : public CounterStore {
 public:
  explicit MemoryCounterStore(std::uint64_t initial = 0) : value_(initial) {}
  std::uint64_t load() const override { return value_; }
  Status store(std::uint64_t value) override {
    value_ = value;
    return ok_status();
  }

 private:
  std::uint64_t value_;
};

// Decimal value in a file, replaced by write-then-rename.
class FileCounterStore final : public CounterStore {
 public:
  explicit FileCounterStore(std::filesystem::path path) : path_(std::move(path)) {}
  std::uint64_t load() const override;
  Status store(std::uint64_t value) override;

 private:
  std::filesystem::path path_;
};

enum class Outcome { accept, invalid_request, ticket_expired, invalid_counter, auth_failure };

std::string_view to_string(Outcome o);
// Wire text for each outcome: "OK ...", "Invalid Request", "Ticket Expired",
// "Invalid Counter", "Auth Failure".
std::string_view response_text(Outcome o);
Result<Outcome> parse_outcome(std::string_view s);

struct ServiceVerdict {
  Outcome outcome = Outcome::invalid_request;
  std::string reason;    // local diagnostic, never sent
  std::string response;  // datagram returned to the client
};

struct RotConfig {
  wire::DeviceType type = wire::DeviceType::general;
  wire::NumericId id;
  wire::NumericId isv_id;
  unsigned window = 16;             // Dev_pc counter buffer size n
  Seconds freshness_window = 300;   // Dev_g |TS - local time| bound
  bool seal_responses = false;      // seal LED responses under the session key
};

struct RotKeys {
  SymmetricKey kl_sync;
  SymmetricKey kl_tkt;
  SymmetricKey kl_key;
};

// Called by the secure side once a request is authorized; performs the
// actuation and returns the non-sensitive response body.
using Actuator = std::function<std::string(wire::Command)>;

class RootOfTrust {
 public:
  static constexpr unsigned kMaxWindow = 64;

  RootOfTrust(RotConfig config, RotKeys keys, CounterStore& counter, const Clock& timer,
              RandomSource& rng);

  RootOfTrust(const RootOfTrust&) = delete;
  RootOfTrust& operator=(const RootOfTrust&) = delete;

  // Increments and persists co_sync, then returns the SyncRequest frame.
  Result<std::string> begin_sync();
  // The pending SyncRequest again, same co_sync.
  Result<std::string> resend_sync() const;
  bool sync_pending() const { return pending_sync_.has_value(); }

  // Dev_pc attestation leg; AuthFailure leaves no trace and sends nothing.
  Result<std::string> answer_attest_request(std::string_view frame, ByteView memory) const;
  Status accept_sync_response(std::string_view frame);

  bool synced() const;
  Result<Timestamp> local_time() const;
  std::uint64_t co_sync() const { return counter_.load(); }
  // Dev_pc window bounds (base, base + n]; nullopt before a sync.
  std::optional<std::pair<std::uint64_t, unsigned>> window() const;
  std::size_t seen_set_size() const { return seen_.size(); }

  ServiceVerdict serve_g(std::string_view frame, ByteView memory, const Actuator& act);
  ServiceVerdict serve_pc(std::string_view frame, const Actuator& act);

  // Forgets RAM state (sync, window, seen-set); co_sync is persistent.
  void power_cycle();

 private:
  ServiceVerdict reject(Outcome o, std::string reason) const;
  ServiceVerdict accept(const SymmetricKey& session, wire::Command cmd, ByteView memory,
                        const Actuator& act);

  RotConfig config_;
  RotKeys keys_;
  CounterStore& counter_;
  const Clock& timer_;
  RandomSource& rng_;

  std::optional<std::uint64_t> pending_sync_;
  // Dev_g
  std::optional<Timestamp> start_time_;
  Timestamp timer_origin_ = 0;
  std::map<std::pair<std::uint32_t, Timestamp>, Timestamp> seen_;  // (id_c, TS) -> expiry
  // Dev_pc
  std::optional<std::uint64_t> window_base_;
  std::bitset<kMaxWindow> used_;
};

}  // namespace kesic::device
