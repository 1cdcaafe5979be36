#include "kesic/net/udp.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <charconv>

namespace kesic::net {

namespace {

Result<sockaddr_in> to_sockaddr(const Endpoint& e) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(e.port);
  std::string host = e.host == "localhost" ? "127.0.0.1" : e.host;
  if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1) {
    return make_error(Errc::InvalidArgument, "not an IPv4 address: " + e.host);
  }
  return sa;
}

Endpoint from_sockaddr(const sockaddr_in& sa) {
  char buf[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &sa.sin_addr, buf, sizeof buf);
  return Endpoint{buf, ntohs(sa.sin_port)};
}

Error sys_error(Errc code, const char* what) {
  return make_error(code, std::string(what) + ": " + std::strerror(errno));
}

}  // namespace

Result<Endpoint> Endpoint::parse(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos) return make_error(Errc::InvalidArgument, "missing port");
  unsigned port = 0;
  auto ps = text.substr(colon + 1);
  auto [p, ec] = std::from_chars(ps.data(), ps.data() + ps.size(), port);
  if (ec != std::errc() || p != ps.data() + ps.size() || port > 65535) {
    return make_error(Errc::InvalidArgument, "bad port in " + std::string(text));
  }
  Endpoint e{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
  if (e.host.empty()) e.host = "127.0.0.1";
  KESIC_CHECK(to_sockaddr(e));
  return e;
}

Result<UdpSocket> UdpSocket::bind(const Endpoint& local) {
  KESIC_TRY(sa, to_sockaddr(local));
  int fd = ::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return sys_error(Errc::IoError, "socket");
  UdpSocket sock(fd);
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) {
    return sys_error(errno == EADDRINUSE ? Errc::PortInUse : Errc::IoError, "bind");
  }
  return sock;
}

UdpSocket& UdpSocket::operator=(UdpSocket&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

UdpSocket::~UdpSocket() {
  if (fd_ >= 0) ::close(fd_);
}

Status UdpSocket::send_to(const Endpoint& to, std::string_view payload) const {
  KESIC_TRY(sa, to_sockaddr(to));
  auto n = ::sendto(fd_, payload.data(), payload.size(), 0, reinterpret_cast<const sockaddr*>(&sa),
                    sizeof sa);
  if (n < 0) return sys_error(Errc::TransportError, "sendto");
  return ok_status();
}

Result<Datagram> UdpSocket::receive(std::chrono::milliseconds timeout) const {
  pollfd pfd{fd_, POLLIN, 0};
  int r = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (r < 0) return sys_error(Errc::TransportError, "poll");
  if (r == 0) return make_error(Errc::Timeout, "no datagram within " +
                                                   std::to_string(timeout.count()) + " ms");
  std::string buf(kMaxDatagram, '\0');
  sockaddr_in sa{};
  socklen_t len = sizeof sa;
  auto n = ::recvfrom(fd_, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&sa), &len);
  if (n < 0) return sys_error(Errc::TransportError, "recvfrom");
  buf.resize(static_cast<std::size_t>(n));
  return Datagram{std::move(buf), from_sockaddr(sa)};
}

Endpoint UdpSocket::local() const {
  sockaddr_in sa{};
  socklen_t len = sizeof sa;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len);
  return from_sockaddr(sa);
}

Result<std::string> udp_request(const Endpoint& to, std::string_view payload,
                                std::chrono::milliseconds timeout) {
  KESIC_TRY(sock, UdpSocket::bind(Endpoint{"0.0.0.0", 0}));
  KESIC_CHECK(sock.send_to(to, payload));
  KESIC_TRY(reply, sock.receive(timeout));
  return std::move(reply.payload);
}

}  // namespace kesic::net
