#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

#include "kesic/common/result.hpp"

namespace kesic::net {

// IPv4 "host:port". Hostnames other than "localhost" are not resolved.
struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  static Result<Endpoint> parse(std::string_view text);
  std::string render() const { return host + ":" + std::to_string(port); }
  bool operator==(const Endpoint&) const = default;
};

struct Datagram {
  std::string payload;
  Endpoint from;
};

class UdpSocket {
 public:
  // Port 0 picks an ephemeral port. PortInUse when the port is taken.
  static Result<UdpSocket> bind(const Endpoint& local);

  UdpSocket(UdpSocket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  UdpSocket& operator=(UdpSocket&& o) noexcept;
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;
  ~UdpSocket();

  Status send_to(const Endpoint& to, std::string_view payload) const;
  // Timeout when nothing arrives in time.
  Result<Datagram> receive(std::chrono::milliseconds timeout) const;
  Endpoint local() const;
  int fd() const { return fd_; }

 private:
  explicit UdpSocket(int fd) : fd_(fd) {}
  int fd_ = -1;
};

// One request, one reply, from a fresh ephemeral socket.
Result<std::string> udp_request(const Endpoint& to, std::string_view payload,
                                std::chrono::milliseconds timeout);

inline constexpr std::size_t kMaxDatagram = 65507;

}  // namespace kesic::net
