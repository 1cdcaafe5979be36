#pragma once

#include <chrono>
#include <map>
#include <string>

#include "kesic/client/client.hpp"
#include "kesic/net/udp.hpp"

namespace kesic::net {

// Client transports over real sockets.

class UdpKdcLink final : public client::KdcLink {
 public:
  UdpKdcLink(Endpoint kdc, std::chrono::milliseconds timeout) : kdc_(std::move(kdc)), timeout_(timeout) {}
  Result<std::string> exchange(std::string_view request) override;

 private:
  Endpoint kdc_;
  std::chrono::milliseconds timeout_;
};

class HttpIsvLink final : public client::IsvLink {
 public:
  // base_url: "http://host:port"
  HttpIsvLink(std::string base_url, std::chrono::milliseconds timeout)
      : base_url_(std::move(base_url)), timeout_(timeout) {}
  Result<client::HttpResponse> post_ticket(std::string_view authorization,
                                           std::string_view body) override;

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

class UdpDeviceLink final : public client::DeviceLink {
 public:
  UdpDeviceLink(std::map<std::string, std::string> addrs, std::chrono::milliseconds timeout)
      : addrs_(std::move(addrs)), timeout_(timeout) {}
  Result<std::string> send(const std::string& device, std::string_view frame) override;

 private:
  std::map<std::string, std::string> addrs_;
  std::chrono::milliseconds timeout_;
};

}  // namespace kesic::net
