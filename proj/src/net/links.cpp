#include "kesic/net/links.hpp"

#include <httplib.h>

namespace kesic::net {

Result<std::string> UdpKdcLink::exchange(std::string_view request) {
  return udp_request(kdc_, request, timeout_);
}

Result<client::HttpResponse> HttpIsvLink::post_ticket(std::string_view authorization,
                                                      std::string_view body) {
  httplib::Client http(base_url_);
  auto secs = timeout_.count() / 1000;
  auto usecs = (timeout_.count() % 1000) * 1000;
  http.set_connection_timeout(secs, usecs);
  http.set_read_timeout(secs, usecs);
  httplib::Headers headers{{"Authorization", std::string(authorization)}};
  auto res = http.Post("/ticket", headers, std::string(body), "application/json");
  if (!res) {
    return make_error(Errc::TransportError,
                      base_url_ + ": " + httplib::to_string(res.error()));
  }
  return client::HttpResponse{res->status, res->body};
}

Result<std::string> UdpDeviceLink::send(const std::string& device, std::string_view frame) {
  auto it = addrs_.find(device);
  if (it == addrs_.end()) return make_error(Errc::InvalidArgument, "no address for " + device);
  KESIC_TRY(ep, Endpoint::parse(it->second));
  return udp_request(ep, frame, timeout_);
}

}  // namespace kesic::net
