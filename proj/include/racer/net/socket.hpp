#pragma once

#include <memory>
#include <string>
#include <vector>

#include "racer/net/wire.hpp"

namespace racer::net {

enum class RecvStatus { ok, timeout, closed };

/// Blocking TCP connection carrying length-prefixed frames.
class TcpConn {
 public:
  TcpConn() = default;
  explicit TcpConn(int fd) : fd_(fd) {}
  ~TcpConn();
  TcpConn(TcpConn&& o) noexcept;
  TcpConn& operator=(TcpConn&& o) noexcept;
  TcpConn(const TcpConn&) = delete;
  TcpConn& operator=(const TcpConn&) = delete;

  static TcpConn connect(const std::string& host, int port);

  bool valid() const { return fd_ >= 0; }
  void close();

  /// Sends one complete frame; throws WireError on a broken connection.
  void send_msg(const WireMessage& msg);

  /// Receives one frame. timeout_ms < 0 blocks indefinitely. Throws
  /// WireError on malformed frames.
  RecvStatus recv_msg(WireMessage* out, int timeout_ms = -1);

  /// Raw byte send, for malformed-input tests.
  void send_raw(const std::vector<uint8_t>& bytes);

 private:
  int fd_ = -1;
  std::vector<uint8_t> inbox_;
};

/// Listening socket on 127.0.0.1; port 0 picks an ephemeral port.
class TcpListener {
 public:
  explicit TcpListener(int port = 0);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int port() const { return port_; }
  void close();

  /// Accepts one connection; returns an invalid conn on timeout or after
  /// close().
  TcpConn accept(int timeout_ms = -1);

 private:
  int fd_ = -1;
  int port_ = 0;
};

}  // namespace racer::net
