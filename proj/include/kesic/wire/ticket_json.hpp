#pragma once

#include <string>

#include "kesic/common/json_io.hpp"
#include "kesic/common/result.hpp"

namespace kesic::wire {

// Body of POST /ticket.
struct TicketRequestJson {
  std::string user_name;
  std::string device_id;  // semantic device name
  bool operator==(const TicketRequestJson&) const = default;
};

// Plaintext of the sealed ticket grant. Every value is a string: numeric
// fields carry their canonical fixed-width rendering, keys and tickets are
// lowercase hex. `nonce` is the 28-char lifetime for Dev_g and the 24-char
// co_pc for Dev_pc, so its width tells the two device classes apart.
struct TicketResponseJson {
  std::string device_id;  // numeric device id, 8 digits
  std::string nonce;
  std::string session_key;
  std::string ticket;
  std::string timestamp;
  bool operator==(const TicketResponseJson&) const = default;
};

Json to_json(const TicketRequestJson& r);
Json to_json(const TicketResponseJson& r);

// Both parsers require exactly the documented property names, all strings.
Result<TicketRequestJson> parse_ticket_request(const Json& j);
Result<TicketResponseJson> parse_ticket_response(const Json& j);

}  // namespace kesic::wire
