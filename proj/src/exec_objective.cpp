#include "tunekit/exec_objective.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <nlohmann/json.hpp>

#include "tunekit/errors.hpp"

extern char** environ;

namespace tunekit {

namespace {

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const noexcept { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

double parse_reply(const std::string& out) {
  const auto line = out.substr(0, out.find('\n'));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw Error("command printed '" + line + "' instead of a number");
  }
  if (j.is_number()) return j.get<double>();
  if (j.is_object() && j.contains("error") && j["error"].is_string()) {
    throw Error(j["error"].get<std::string>());
  }
  throw Error("command printed '" + line + "' instead of a number or {\"error\": ...}");
}

}  // namespace

double ExecObjective::evaluate(const ParamVector& params) {
  ++invocations_;
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
  Fd in_read(in_pipe[0]), in_write(in_pipe[1]);
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
  Fd out_read(out_pipe[0]), out_write(out_pipe[1]);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_read.get(), STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_write.get(), STDOUT_FILENO);

  const char* argv[] = {"/bin/sh", "-c", command_.c_str(), nullptr};
  pid_t pid = 0;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw Error(std::string("posix_spawn: ") + std::strerror(rc));
  in_read.reset();
  out_write.reset();

  const std::string input = to_json(params).dump() + "\n";
  std::string_view pending = input;
  // A command that exits without reading stdin is fine; the write just stops.
  while (!pending.empty()) {
    const ssize_t n = ::write(in_write.get(), pending.data(), pending.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    pending.remove_prefix(static_cast<std::size_t>(n));
  }
  in_write.reset();

  std::string output;
  char buf[4096];
  while (true) {
    const ssize_t n = ::read(out_read.get(), buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    output.append(buf, static_cast<std::size_t>(n));
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw Error("command exited with status " + std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  }
  return parse_reply(output);
}

}  // namespace tunekit
