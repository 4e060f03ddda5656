#include "racer/net/socket.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace racer::net {

namespace {

[[noreturn]] void sys_fail(const std::string& what) {
  throw WireError(what + ": " + std::strerror(errno));
}

sockaddr_in loopback(int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  return addr;
}

}  // namespace

TcpConn::~TcpConn() { close(); }

TcpConn::TcpConn(TcpConn&& o) noexcept
    : fd_(o.fd_), inbox_(std::move(o.inbox_)) {
  o.fd_ = -1;
}

TcpConn& TcpConn::operator=(TcpConn&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    inbox_ = std::move(o.inbox_);
    o.fd_ = -1;
  }
  return *this;
}

void TcpConn::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

TcpConn TcpConn::connect(const std::string& host, int port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) sys_fail("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw WireError("bad host address: " + host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    int e = errno;
    ::close(fd);
    errno = e;
    sys_fail("connect");
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return TcpConn(fd);
}

void TcpConn::send_msg(const WireMessage& msg) {
  send_raw(encode_frame(msg));
}

void TcpConn::send_raw(const std::vector<uint8_t>& bytes) {
  if (fd_ < 0) throw WireError("send on closed connection");
  size_t off = 0;
  while (off < bytes.size()) {
    ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off,
                       MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    off += static_cast<size_t>(n);
  }
}

RecvStatus TcpConn::recv_msg(WireMessage* out, int timeout_ms) {
  if (fd_ < 0) return RecvStatus::closed;
  for (;;) {
    size_t consumed = 0;
    if (decode_frame(inbox_, out, &consumed)) {
      inbox_.erase(inbox_.begin(), inbox_.begin() + consumed);
      return RecvStatus::ok;
    }
    pollfd pfd{fd_, POLLIN, 0};
    int pr = ::poll(&pfd, 1, timeout_ms);
    if (pr == 0) return RecvStatus::timeout;
    if (pr < 0) {
      if (errno == EINTR) continue;
      sys_fail("poll");
    }
    uint8_t buf[16384];
    ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n == 0) return RecvStatus::closed;
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == ECONNRESET) return RecvStatus::closed;
      sys_fail("recv");
    }
    inbox_.insert(inbox_.end(), buf, buf + n);
  }
}

TcpListener::TcpListener(int port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) sys_fail("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = loopback(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
    sys_fail("bind");
  if (::listen(fd_, 64) != 0) sys_fail("listen");
  socklen_t len = sizeof(addr);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0)
    sys_fail("getsockname");
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

TcpConn TcpListener::accept(int timeout_ms) {
  if (fd_ < 0) return TcpConn();
  pollfd pfd{fd_, POLLIN, 0};
  int pr = ::poll(&pfd, 1, timeout_ms);
  if (pr <= 0) return TcpConn();
  int cfd = ::accept(fd_, nullptr, nullptr);
  if (cfd < 0) return TcpConn();
  int one = 1;
  ::setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return TcpConn(cfd);
}

}  // namespace racer::net
