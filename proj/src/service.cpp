#include "dare/service.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <deque>

namespace dare {
namespace {

using namespace protocol;

bool write_all(int fd, std::span<const std::uint8_t> bytes)
{
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR)
        continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

bool read_all(int fd, std::uint8_t* data, std::size_t size)
{
  std::size_t got = 0;
  while (got < size) {
    const ssize_t n = ::recv(fd, data + got, size - got, 0);
    if (n <= 0) {
      if (n < 0 && errno == EINTR)
        continue;
      return false;
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

enum class ReadStatus { Ok, Closed, Oversized };

// Reads one frame body (after the length prefix).
ReadStatus read_frame(int fd, std::vector<std::uint8_t>& body)
{
  std::uint32_t len = 0;
  if (!read_all(fd, reinterpret_cast<std::uint8_t*>(&len), sizeof len))
    return ReadStatus::Closed;
  if (len > kMaxFrameBytes)
    return ReadStatus::Oversized;
  body.resize(len);
  return read_all(fd, body.data(), len) ? ReadStatus::Ok : ReadStatus::Closed;
}

ResliceResponse error_response(std::uint64_t id, std::string message)
{
  ResliceResponse r;
  r.id = id;
  r.status = Status::Error;
  r.error = std::move(message);
  return r;
}

// Best-effort id of a reslice request whose body failed to decode.
std::uint64_t peek_id(std::span<const std::uint8_t> body)
{
  if (body.size() >= 10 && body[1] == static_cast<std::uint8_t>(MessageType::ResliceRequest)) {
    std::uint64_t id;
    std::memcpy(&id, body.data() + 2, sizeof id);
    return id;
  }
  return 0;
}

}  // namespace

std::uint16_t default_port()
{
  if (const char* env = std::getenv("DARE_PORT")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v < 65536)
      return static_cast<std::uint16_t>(v);
  }
  return 7420;
}

struct ResliceService::Connection {
  struct ErrorItem {
    ResliceResponse response;
  };
  using Item = std::variant<HelloRequest, ResliceRequest, ErrorItem>;

  int fd = -1;
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Item> queue;
  bool reader_done = false;
  std::atomic<bool> finished{false};  // worker exited and both threads can be joined
  std::thread reader, worker;

  void push(Item item)
  {
    {
      std::lock_guard lock(mutex);
      queue.push_back(std::move(item));
    }
    cv.notify_one();
  }
  void finish()
  {
    {
      std::lock_guard lock(mutex);
      reader_done = true;
    }
    cv.notify_one();
  }
};

ResliceService::ResliceService(std::shared_ptr<const DirectionalVolume> volume,
                               std::shared_ptr<const ScalarVolume> baseline, ResliceConfig config)
    : volume_(std::move(volume)), baseline_(std::move(baseline)), config_(config)
{
  if (!volume_)
    throw std::invalid_argument("service needs a volume");
  config_.validate();
}

ResliceService::~ResliceService() { stop(); }

HelloResponse ResliceService::hello() const
{
  HelloResponse h;
  const GridGeometry& g = volume_->grid();
  h.origin = g.origin;
  h.voxel_size = g.voxel_size;
  for (int i = 0; i < 3; ++i)
    h.dims[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(g.dims[i]);
  h.sample_count = volume_->sample_count();
  h.has_baseline = baseline_ != nullptr;
  return h;
}

ResliceResponse ResliceService::handle(const ResliceRequest& req) const
{
  if (auto problem = validate_request(req))
    return error_response(req.id, *problem);
  ReslicePlane plane = req.plane;
  plane.pose.rotation.normalize();
  try {
    if (req.method == Method::Baseline) {
      if (!baseline_)
        return error_response(req.id, "method: no baseline volume loaded");
      return make_response(req.id, reslice_trilinear(*baseline_, plane), req.encoding);
    }
    const ResliceConfig cfg = effective_config(req, config_, volume_->grid().voxel_size);
    return make_response(req.id, reslice(*volume_, plane, cfg), req.encoding);
  } catch (const std::exception& e) {
    return error_response(req.id, e.what());
  }
}

std::uint16_t ResliceService::start(std::uint16_t port, const std::string& host)
{
  if (running_)
    throw std::logic_error("service already running");
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0)
    throw std::runtime_error("socket() failed: " + std::string(std::strerror(errno)));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw std::invalid_argument("invalid IPv4 address: " + host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  return ntohs(addr.sin_port);
}

void ResliceService::wait()
{
  if (acceptor_.joinable())
    acceptor_.join();
}

void ResliceService::stop()
{
  if (!running_.exchange(false))
    return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable() && acceptor_.get_id() != std::this_thread::get_id())
    acceptor_.join();
  std::list<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(conns_mutex_);
    conns.swap(connections_);
  }
  for (auto& c : conns) {
    ::shutdown(c->fd, SHUT_RDWR);
    if (c->reader.joinable())
      c->reader.join();
    if (c->worker.joinable())
      c->worker.join();
    ::close(c->fd);
  }
}

void ResliceService::accept_loop()
{
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR)
        continue;
      break;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    {
      std::lock_guard lock(conns_mutex_);
      connections_.remove_if([](const std::shared_ptr<Connection>& c) {
        if (!c->finished)
          return false;
        c->reader.join();
        c->worker.join();
        ::close(c->fd);
        return true;
      });
      connections_.push_back(conn);
    }
    serve_connection(conn);
  }
}

void ResliceService::serve_connection(const std::shared_ptr<Connection>& conn)
{
  conn->reader = std::thread([conn] {
    int consecutive_failures = 0;
    std::vector<std::uint8_t> body;
    while (true) {
      const ReadStatus st = read_frame(conn->fd, body);
      if (st == ReadStatus::Closed)
        break;
      if (st == ReadStatus::Oversized) {
        conn->push(Connection::ErrorItem{error_response(0, "frame exceeds maximum size")});
        break;  // the stream cannot be resynchronized
      }
      try {
        Message m = decode_body(body);
        consecutive_failures = 0;
        if (auto* req = std::get_if<ResliceRequest>(&m))
          conn->push(std::move(*req));
        else if (std::holds_alternative<HelloRequest>(m))
          conn->push(HelloRequest{});
        else
          conn->push(Connection::ErrorItem{error_response(0, "unexpected message type from client")});
      } catch (const DecodeError& e) {
        conn->push(Connection::ErrorItem{error_response(peek_id(body), std::string("malformed message: ") + e.what())});
        if (++consecutive_failures >= 2)
          break;
      }
    }
    conn->finish();
  });

  conn->worker = std::thread([this, conn] {
    bool alive = true;
    while (alive) {
      std::deque<Connection::Item> batch;
      bool done;
      {
        std::unique_lock lock(conn->mutex);
        conn->cv.wait(lock, [&] { return !conn->queue.empty() || conn->reader_done; });
        batch.swap(conn->queue);
        done = conn->reader_done;
      }
      std::size_t newest = batch.size();
      for (std::size_t i = 0; i < batch.size(); ++i)
        if (std::holds_alternative<ResliceRequest>(batch[i]))
          newest = i;
      for (std::size_t i = 0; i < batch.size() && alive; ++i) {
        Message reply;
        if (const auto* req = std::get_if<ResliceRequest>(&batch[i])) {
          if (i != newest) {
            ResliceResponse r;
            r.id = req->id;
            r.status = Status::Superseded;
            r.superseded_by = std::get<ResliceRequest>(batch[newest]).id;
            reply = r;
          } else {
            reply = handle(*req);
          }
        } else if (std::holds_alternative<HelloRequest>(batch[i])) {
          reply = hello();
        } else {
          reply = std::get<Connection::ErrorItem>(batch[i]).response;
        }
        alive = write_all(conn->fd, encode(reply));
      }
      if (done)
        break;
    }
    ::shutdown(conn->fd, SHUT_RDWR);
    conn->finished = true;
  });
}

ServiceClient::ServiceClient(const std::string& host, std::uint16_t port)
{
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
    throw std::runtime_error("cannot resolve " + host);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int rc = fd_ < 0 ? -1 : ::connect(fd_, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0) {
    if (fd_ >= 0)
      ::close(fd_);
    throw std::runtime_error("cannot connect to " + host + ":" + std::to_string(port));
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

ServiceClient::~ServiceClient()
{
  if (fd_ >= 0)
    ::close(fd_);
}

void ServiceClient::send(const Message& m) { send_raw(encode(m)); }

void ServiceClient::send_raw(std::span<const std::uint8_t> bytes)
{
  if (!write_all(fd_, bytes))
    throw std::runtime_error("send failed: connection closed");
}

Message ServiceClient::receive()
{
  std::vector<std::uint8_t> body;
  if (read_frame(fd_, body) != ReadStatus::Ok)
    throw std::runtime_error("connection closed by server");
  return decode_body(body);
}

bool ServiceClient::closed_by_peer(int timeout_ms)
{
  pollfd p{fd_, POLLIN, 0};
  if (::poll(&p, 1, timeout_ms) <= 0)
    return false;
  std::uint8_t byte;
  return ::recv(fd_, &byte, 1, MSG_PEEK) == 0;
}

}  // namespace dare
