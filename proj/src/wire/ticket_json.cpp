#include "kesic/wire/ticket_json.hpp"

#include <array>
#include <string_view>

namespace kesic::wire {

namespace {

template <std::size_t N>
Result<std::array<std::string, N>> exact_string_object(
    const Json& j, const std::array<std::string_view, N>& keys) {
  if (!j.is_object()) return make_error(Errc::ParseError, "expected a JSON object");
  if (j.size() != N) {
    return make_error(Errc::ParseError, "expected exactly " + std::to_string(N) + " properties");
  }
  std::array<std::string, N> out;
  for (std::size_t i = 0; i < N; ++i) {
    auto it = j.find(std::string(keys[i]));
    if (it == j.end() || !it->is_string()) {
      return make_error(Errc::ParseError, "missing string property " + std::string(keys[i]));
    }
    out[i] = it->get<std::string>();
  }
  return out;
}

constexpr std::array<std::string_view, 2> kRequestKeys{"user_name", "device_id"};
constexpr std::array<std::string_view, 5> kResponseKeys{"device_id", "nonce", "session_key",
                                                        "ticket", "timestamp"};

}  // namespace

Json to_json(const TicketRequestJson& r) {
  return Json{{"user_name", r.user_name}, {"device_id", r.device_id}};
}

Json to_json(const TicketResponseJson& r) {
  return Json{{"device_id", r.device_id},
              {"nonce", r.nonce},
              {"session_key", r.session_key},
              {"ticket", r.ticket},
              {"timestamp", r.timestamp}};
}

Result<TicketRequestJson> parse_ticket_request(const Json& j) {
  KESIC_TRY(v, exact_string_object(j, kRequestKeys));
  return TicketRequestJson{v[0], v[1]};
}

Result<TicketResponseJson> parse_ticket_response(const Json& j) {
  KESIC_TRY(v, exact_string_object(j, kResponseKeys));
  return TicketResponseJson{v[0], v[1], v[2], v[3], v[4]};
}

}  // namespace kesic::wire
