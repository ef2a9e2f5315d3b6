#include "tunekit/session.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <list>
#include <thread>

#include "tunekit/constraints.hpp"
#include "tunekit/errors.hpp"

namespace tunekit {

namespace {

using Clock = std::chrono::steady_clock;
constexpr std::chrono::milliseconds kPollSlice{100};

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

// Removes the line ending at `pos` from the buffer; a CR before the LF is dropped too.
std::string take_line(std::string& buffer, std::size_t pos) {
  std::string line = buffer.substr(0, pos);
  buffer.erase(0, pos + 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

/// Violations the session reports back to the peer as ErrorMsg.
class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

/// Objective that forwards each batch to the peer.
class RemoteObjective : public Objective {
 public:
  RemoteObjective(LineStream& stream, std::chrono::milliseconds timeout)
      : stream_(stream), timeout_(timeout) {}

  double evaluate(const ParamVector& params) override {
    auto out = evaluate_batch(std::span<const ParamVector>(&params, 1), 1);
    if (!out.front().ok()) throw Error(out.front().error);
    return *out.front().score;
  }

  std::vector<Outcome> evaluate_batch(std::span<const ParamVector> candidates, std::size_t) override {
    const std::uint64_t id = next_id_++;
    stream_.write(protocol::encode(protocol::EvalRequest{id, {candidates.begin(), candidates.end()}}));
    ++sent_;
    const auto line = stream_.read_line(timeout_);
    if (!line) throw PeerClosed("peer closed the connection while a request was outstanding");
    auto msg = protocol::decode(*line);
    auto* reply = std::get_if<protocol::EvalReply>(&msg);
    if (!reply) throw ProtocolViolation("unexpected message in phase solving");
    if (reply->request_id != id) {
      throw ProtocolViolation("reply request_id " + std::to_string(reply->request_id) +
                              " does not match outstanding request " + std::to_string(id));
    }
    if (reply->values.size() != candidates.size()) {
      throw ProtocolViolation("reply carries " + std::to_string(reply->values.size()) +
                              " values for " + std::to_string(candidates.size()) + " candidates");
    }
    return std::move(reply->values);
  }

  std::size_t sent() const noexcept { return sent_; }

 private:
  LineStream& stream_;
  std::chrono::milliseconds timeout_;
  std::uint64_t next_id_ = 0;
  std::size_t sent_ = 0;
};

void send_error(LineStream& stream, SessionOutcome& out, std::string text) {
  out.phase = SessionPhase::failed;
  out.error = std::move(text);
  try {
    stream.write(protocol::encode(protocol::ErrorMsg{out.error}));
  } catch (const Error&) {
    // Peer already gone; the outcome still records the failure.
  }
}

}  // namespace

// ---------------------------------------------------------------- PipeStream

std::pair<std::unique_ptr<PipeStream>, std::unique_ptr<PipeStream>> PipeStream::make_pair() {
  auto a = std::make_shared<Channel>();
  auto b = std::make_shared<Channel>();
  return {std::unique_ptr<PipeStream>(new PipeStream(a, b)), std::unique_ptr<PipeStream>(new PipeStream(b, a))};
}

std::optional<std::string> PipeStream::read_line(std::chrono::milliseconds timeout) {
  std::unique_lock lock(in_->mutex);
  const bool ready = in_->cv.wait_for(lock, timeout, [&] {
    return in_->buffer.find('\n') != std::string::npos || in_->closed;
  });
  if (!ready) throw Timeout("no line within " + std::to_string(timeout.count()) + " ms");
  const auto pos = in_->buffer.find('\n');
  if (pos == std::string::npos) return std::nullopt;
  return take_line(in_->buffer, pos);
}

void PipeStream::write(std::string_view bytes) {
  {
    std::lock_guard lock(out_->mutex);
    if (out_->closed) throw PeerClosed("pipe closed");
    out_->buffer.append(bytes);
  }
  out_->cv.notify_all();
}

void PipeStream::close() {
  for (auto* ch : {in_.get(), out_.get()}) {
    {
      std::lock_guard lock(ch->mutex);
      ch->closed = true;
    }
    ch->cv.notify_all();
  }
}

// ---------------------------------------------------------------- sockets

SocketStream::SocketStream(int fd, const std::atomic<bool>* cancel) : fd_(fd), cancel_(cancel) {}

SocketStream::SocketStream(SocketStream&& other) noexcept
    : fd_(other.fd_), cancel_(other.cancel_), buffer_(std::move(other.buffer_)) {
  other.fd_ = -1;
}

SocketStream::~SocketStream() { close(); }

void SocketStream::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::optional<std::string> SocketStream::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  while (true) {
    if (const auto pos = buffer_.find('\n'); pos != std::string::npos) {
      return take_line(buffer_, pos);
    }
    if (fd_ < 0) return std::nullopt;
    if (cancel_ && cancel_->load()) throw PeerClosed("server shutting down");
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) throw Timeout("no line within " + std::to_string(timeout.count()) + " ms");
    pollfd p{fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(std::min(left, kPollSlice).count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw PeerClosed(errno_text("poll"));
    }
    if (rc == 0) continue;
    char chunk[4096];
    const ssize_t got = ::recv(fd_, chunk, sizeof chunk, 0);
    if (got < 0) {
      if (errno == EINTR) continue;
      throw PeerClosed(errno_text("recv"));
    }
    if (got == 0) return std::nullopt;
    buffer_.append(chunk, static_cast<std::size_t>(got));
  }
}

void SocketStream::write(std::string_view bytes) {
  while (!bytes.empty()) {
    if (fd_ < 0) throw PeerClosed("socket closed");
    const ssize_t sent = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (sent < 0) {
      if (errno == EINTR) continue;
      throw PeerClosed(errno_text("send"));
    }
    bytes.remove_prefix(static_cast<std::size_t>(sent));
  }
}

SocketStream connect_tcp(const std::string& host, std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw PeerClosed(errno_text("socket"));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw PeerClosed("invalid IPv4 address '" + host + "'");
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    const auto msg = errno_text("connect");
    ::close(fd);
    throw PeerClosed(msg);
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return SocketStream(fd);
}

TcpListener::TcpListener(std::uint16_t port, const std::string& host) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw PeerClosed(errno_text("socket"));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw PeerClosed("invalid IPv4 address '" + host + "'");
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd_, 16) < 0) {
    const auto msg = errno_text("bind");
    ::close(fd_);
    throw PeerClosed(msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<SocketStream> TcpListener::accept(std::chrono::milliseconds timeout,
                                                const std::atomic<bool>* cancel) {
  const auto deadline = Clock::now() + timeout;
  while (!(cancel && cancel->load())) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd p{fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(std::min(left, kPollSlice).count()));
    if (rc < 0 && errno != EINTR) throw PeerClosed(errno_text("poll"));
    if (rc <= 0) continue;
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      throw PeerClosed(errno_text("accept"));
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return SocketStream(fd, cancel);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- session

std::string to_string(SessionPhase phase) {
  switch (phase) {
    case SessionPhase::awaiting_config: return "awaiting_config";
    case SessionPhase::solving: return "solving";
    case SessionPhase::done: return "done";
    case SessionPhase::failed: return "failed";
  }
  return "unknown";
}

SessionOutcome serve_session(LineStream& stream, const SessionOptions& options) {
  SessionOutcome out;

  std::optional<protocol::ConfigMsg> config;
  try {
    const auto line = stream.read_line(options.reply_timeout);
    if (!line) {
      out.phase = SessionPhase::failed;
      out.error = "peer closed before sending a configuration";
      return out;
    }
    auto msg = protocol::decode(*line);
    if (auto* c = std::get_if<protocol::ConfigMsg>(&msg)) {
      config = std::move(*c);
    } else {
      send_error(stream, out, "unexpected message in phase " + to_string(out.phase));
      return out;
    }
  } catch (const Timeout& e) {
    send_error(stream, out, std::string("timeout: ") + e.what());
    return out;
  } catch (const PeerClosed& e) {
    out.phase = SessionPhase::failed;
    out.error = e.what();
    return out;
  } catch (const Error& e) {
    send_error(stream, out, e.what());
    return out;
  }

  out.phase = SessionPhase::solving;
  auto remote = std::make_shared<RemoteObjective>(stream, options.reply_timeout);
  try {
    std::shared_ptr<Objective> objective = remote;
    if (!config->constraints.empty()) {
      objective = wrap_constraints(remote, config->constraints, *config->default_value);
    }
    RunOptions run{config->seed, options.parallelism, false};
    auto result = optimize(config->solver_config(), *objective, config->space, config->direction,
                           Budget{config->max_evals}, run);
    out.requests_sent = remote->sent();
    stream.write(protocol::encode(protocol::make_result(result)));
    out.result = std::move(result);
    out.phase = SessionPhase::done;
  } catch (const PeerClosed& e) {
    out.requests_sent = remote->sent();
    out.phase = SessionPhase::failed;
    out.error = e.what();
  } catch (const Timeout& e) {
    out.requests_sent = remote->sent();
    send_error(stream, out, std::string("timeout: ") + e.what());
  } catch (const Error& e) {
    out.requests_sent = remote->sent();
    send_error(stream, out, e.what());
  }
  return out;
}

void serve_forever(TcpListener& listener, const SessionOptions& options, const std::atomic<bool>& stop) {
  struct Running {
    std::shared_ptr<std::atomic<bool>> finished;
    std::jthread thread;
  };
  std::list<Running> sessions;
  while (!stop.load()) {
    sessions.remove_if([](const Running& r) { return r.finished->load(); });
    auto conn = listener.accept(std::chrono::milliseconds(250), &stop);
    if (!conn) continue;
    auto finished = std::make_shared<std::atomic<bool>>(false);
    std::jthread worker([options, finished, s = std::move(*conn)]() mutable {
      serve_session(s, options);
      s.close();
      finished->store(true);
    });
    sessions.push_back({std::move(finished), std::move(worker)});
  }
}

}  // namespace tunekit
