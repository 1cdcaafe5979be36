#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "kesic/common/clock.hpp"
#include "kesic/common/random.hpp"
#include "kesic/isv/registry.hpp"
#include "kesic/kdc/kerberos.hpp"
#include "kesic/wire/frames.hpp"
#include "kesic/wire/ticket_json.hpp"

namespace kesic::isv {

struct IsvConfig {
  Seconds iot_ticket_lifetime = 600;
  Seconds clock_skew = 300;
  // How long a Dev_pc counts as awake after a healthy sync.
  Seconds awake_period = 60;
  // How long an attestation challenge stays answerable.
  Seconds attest_timeout = 5;
  // Written after every counter change when set.
  std::filesystem::path snapshot_path;
};

// A datagram the ISV wants sent, addressed by transport-level name.
struct Outbound {
  std::string to;
  std::string payload;
};

struct SyncOutcome {
  Status status = ok_status();
  std::optional<Outbound> reply;
};

struct HttpReply {
  int http_status = 200;
  std::string body;
  Status status = ok_status();
};

int http_status_for(Errc code);

class Isv {
 public:
  Isv(Registry registry, IsvConfig config, const Clock& clock, RandomSource& rng);

  // Synchronization Manager. `from` is the sender's transport address; the
  // reply (if any) goes back there.
  SyncOutcome handle_sync_request(const std::string& from, std::string_view frame);
  SyncOutcome handle_attest_response(const std::string& from, std::string_view frame);

  // Ticket Manager: POST /ticket.
  HttpReply handle_ticket(std::string_view authorization, std::string_view body);

  Registry& registry() { return registry_; }
  const IsvConfig& config() const { return config_; }

  // Restores counters from config.snapshot_path if the file exists.
  Status load_snapshot();

 private:
  struct Requester {
    std::string name;
    wire::NumericId id_c;
    wire::Address ad_c;
  };
  Result<wire::TicketResponseJson> issue(const Requester& who, const wire::NumericId& dev,
                                         Timestamp now);
  wire::SyncResponse make_sync_response(const DeviceRecord& rec, std::uint64_t co_sync,
                                        Timestamp sync_val) const;
  void persist();

  Registry registry_;
  IsvConfig config_;
  const Clock& clock_;
  RandomSource& rng_;
  std::mutex rng_mu_;
  std::mutex persist_mu_;
  krb::ApVerifier ap_;
};

}  // namespace kesic::isv
