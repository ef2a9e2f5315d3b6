#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "tunekit/optimize.hpp"
#include "tunekit/protocol.hpp"

namespace tunekit {

/// Bidirectional stream of newline-framed text.
class LineStream {
 public:
  virtual ~LineStream() = default;

  /// Next line without its terminator; nullopt once the peer has closed.
  /// Throws Timeout when nothing arrives in time.
  virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
  /// Writes bytes verbatim (callers pass newline-terminated lines).
  virtual void write(std::string_view bytes) = 0;
  virtual void close() = 0;
};

/// In-process stream pair for tests and embedding: what one end writes the
/// other end reads.
class PipeStream : public LineStream {
 public:
  static std::pair<std::unique_ptr<PipeStream>, std::unique_ptr<PipeStream>> make_pair();

  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override;
  void write(std::string_view bytes) override;
  void close() override;

 private:
  struct Channel {
    std::mutex mutex;
    std::condition_variable cv;
    std::string buffer;
    bool closed = false;
  };
  PipeStream(std::shared_ptr<Channel> in, std::shared_ptr<Channel> out)
      : in_(std::move(in)), out_(std::move(out)) {}

  std::shared_ptr<Channel> in_;
  std::shared_ptr<Channel> out_;
};

/// Connected TCP socket. Owns the descriptor.
class SocketStream : public LineStream {
 public:
  explicit SocketStream(int fd, const std::atomic<bool>* cancel = nullptr);
  ~SocketStream() override;
  SocketStream(SocketStream&& other) noexcept;
  SocketStream& operator=(SocketStream&&) = delete;
  SocketStream(const SocketStream&) = delete;
  SocketStream& operator=(const SocketStream&) = delete;

  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override;
  void write(std::string_view bytes) override;
  void close() override;

 private:
  int fd_;
  const std::atomic<bool>* cancel_;
  std::string buffer_;
};

SocketStream connect_tcp(const std::string& host, std::uint16_t port);

/// Listening TCP socket; port 0 picks an ephemeral port.
class TcpListener {
 public:
  explicit TcpListener(std::uint16_t port = 0, const std::string& host = "127.0.0.1");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  /// Waits up to `timeout` for a connection.
  std::optional<SocketStream> accept(std::chrono::milliseconds timeout,
                                     const std::atomic<bool>* cancel = nullptr);

 private:
  int fd_;
  std::uint16_t port_;
};

enum class SessionPhase { awaiting_config, solving, done, failed };

std::string to_string(SessionPhase phase);

struct SessionOptions {
  std::chrono::milliseconds reply_timeout{std::chrono::seconds(300)};
  std::size_t parallelism = 1;
};

struct SessionOutcome {
  SessionPhase phase = SessionPhase::awaiting_config;
  std::optional<OptimizationResult> result;
  /// Text of the ErrorMsg sent (or the reason nothing could be sent).
  std::string error;
  std::size_t requests_sent = 0;
};

/// Runs one tuning session: reads a ConfigMsg, proxies every evaluation batch
/// as an EvalRequest and waits for the matching EvalReply, then writes a
/// ResultMsg. Any protocol violation writes an ErrorMsg and fails the session.
SessionOutcome serve_session(LineStream& stream, const SessionOptions& options = {});

/// Accepts connections until `stop` is set, serving each on its own thread.
void serve_forever(TcpListener& listener, const SessionOptions& options, const std::atomic<bool>& stop);

}  // namespace tunekit
