#ifndef DARE_SERVICE_HPP
#define DARE_SERVICE_HPP

#include "dare/baseline.hpp"
#include "dare/protocol.hpp"
#include "dare/volume.hpp"

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace dare {

/// Default TCP port, overridable through the DARE_PORT environment variable.
std::uint16_t default_port();

/// Reslice server over one immutable volume (and optionally its baseline).
///
/// Each connection has a reader and a worker. Requests are answered in arrival
/// order; when several reslice requests are queued, all but the newest are
/// answered with a Superseded status carrying the newest id. Two consecutive
/// undecodable frames close the connection.
class ResliceService {
 public:
  ResliceService(std::shared_ptr<const DirectionalVolume> volume, std::shared_ptr<const ScalarVolume> baseline = nullptr,
                 ResliceConfig config = {});
  ~ResliceService();
  ResliceService(const ResliceService&) = delete;
  ResliceService& operator=(const ResliceService&) = delete;

  /// Binds and starts accepting in a background thread. Port 0 picks a free port.
  std::uint16_t start(std::uint16_t port, const std::string& host = "127.0.0.1");
  /// Blocks until stop() is called from another thread.
  void wait();
  void stop();

  protocol::HelloResponse hello() const;
  /// Transport-free request handling; the server sends exactly this response.
  protocol::ResliceResponse handle(const protocol::ResliceRequest& req) const;

 private:
  struct Connection;
  void accept_loop();
  void serve_connection(const std::shared_ptr<Connection>& conn);

  std::shared_ptr<const DirectionalVolume> volume_;
  std::shared_ptr<const ScalarVolume> baseline_;
  ResliceConfig config_;

  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex conns_mutex_;
  std::list<std::shared_ptr<Connection>> connections_;
};

/// Blocking client used by tools and tests.
class ServiceClient {
 public:
  ServiceClient(const std::string& host, std::uint16_t port);
  ~ServiceClient();
  ServiceClient(const ServiceClient&) = delete;
  ServiceClient& operator=(const ServiceClient&) = delete;

  void send(const protocol::Message& m);
  void send_raw(std::span<const std::uint8_t> bytes);
  /// Next message; throws on a closed connection.
  protocol::Message receive();
  /// True when the peer has closed the connection (non-blocking probe after a short wait).
  bool closed_by_peer(int timeout_ms = 1000);

 private:
  int fd_ = -1;
};

}  // namespace dare

#endif  // DARE_SERVICE_HPP
