#pragma once

// Scripted protocol client: sends a ConfigMsg, answers every EvalRequest by
// scoring each candidate locally, and records the transcript.

#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tunekit/errors.hpp"
#include "tunekit/protocol.hpp"
#include "tunekit/session.hpp"

namespace tunekit::testing {

struct Transcript {
  /// Lines in send order, prefixed with "> " (client to engine) or "< ".
  std::vector<std::string> lines;
  std::optional<protocol::ResultMsg> result;
  std::optional<protocol::ErrorMsg> error;
};

/// Candidate -> reply value. Throwing produces an {"error": ...} value.
using ClientFn = std::function<double(const ParamVector&)>;

inline Transcript run_echo_client(LineStream& stream, const protocol::ConfigMsg& config, const ClientFn& fn) {
  using namespace std::chrono_literals;
  Transcript t;
  const auto send = [&](const protocol::Message& m) {
    const auto line = protocol::encode(m);
    t.lines.push_back("> " + line.substr(0, line.size() - 1));
    stream.write(line);
  };
  send(config);
  while (true) {
    const auto line = stream.read_line(30s);
    if (!line) break;
    t.lines.push_back("< " + *line);
    const auto msg = protocol::decode(*line);
    if (const auto* req = std::get_if<protocol::EvalRequest>(&msg)) {
      protocol::EvalReply reply{req->request_id, {}};
      for (const auto& c : req->candidates) {
        try {
          reply.values.push_back(Outcome::success(fn(c)));
        } catch (const std::exception& e) {
          reply.values.push_back(Outcome::failure(e.what()));
        }
      }
      send(reply);
    } else if (const auto* res = std::get_if<protocol::ResultMsg>(&msg)) {
      t.result = *res;
      break;
    } else if (const auto* err = std::get_if<protocol::ErrorMsg>(&msg)) {
      t.error = *err;
      break;
    }
  }
  return t;
}

/// Runs serve_session on one end of an in-process pipe and the echo client on the other.
inline std::pair<SessionOutcome, Transcript> pipe_session(const protocol::ConfigMsg& config, const ClientFn& fn,
                                                          const SessionOptions& options = {}) {
  auto [server_end, client_end] = PipeStream::make_pair();
  SessionOutcome outcome;
  std::thread server([&, s = server_end.get()] {
    outcome = serve_session(*s, options);
    s->close();
  });
  auto transcript = run_echo_client(*client_end, config, fn);
  server.join();
  return {std::move(outcome), std::move(transcript)};
}

}  // namespace tunekit::testing
