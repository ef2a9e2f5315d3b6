#include <doctest.h>

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "echo_client.hpp"
#include "tunekit/test_functions.hpp"

extern char** environ;

using namespace tunekit;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "tunekit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const std::atomic<bool> stop{false};
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err, stop);
  return {code, out.str(), err.str()};
}

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() / ("tunekit_cli_" + std::to_string(::getpid()));
  std::filesystem::create_directories(p);
  return p;
}

// The real binary, with stdout on a pipe we can read line by line.
class Child {
 public:
  explicit Child(const std::vector<std::string>& args) {
    int fds[2];
    REQUIRE(::pipe(fds) == 0);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], 1);
    posix_spawn_file_actions_addclose(&actions, fds[0]);
    posix_spawn_file_actions_addopen(&actions, 2, "/dev/null", O_WRONLY, 0);
    std::vector<std::string> all = {TUNEKIT_CLI_PATH};
    all.insert(all.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : all) argv.push_back(a.data());
    argv.push_back(nullptr);
    REQUIRE(::posix_spawn(&pid_, TUNEKIT_CLI_PATH, &actions, nullptr, argv.data(), environ) == 0);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    out_ = fds[0];
  }
  ~Child() {
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
    ::close(out_);
  }

  std::string read_line() {
    std::string line;
    char c;
    while (::read(out_, &c, 1) == 1 && c != '\n') line.push_back(c);
    return line;
  }

  void signal(int sig) { ::kill(pid_, sig); }

  // Exit status, or -1 if the process is still running after `limit`.
  int wait(std::chrono::milliseconds limit) {
    const auto deadline = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < deadline) {
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
      }
      std::this_thread::sleep_for(20ms);
    }
    return -1;
  }

 private:
  pid_t pid_ = -1;
  int out_ = -1;
};

std::uint16_t port_of(const std::string& line) {
  REQUIRE(line.starts_with("PORT "));
  return static_cast<std::uint16_t>(std::stoi(line.substr(5)));
}

}  // namespace

TEST_CASE("tune a built-in function") {
  const auto r = cli_run({"tune", "--objective", "builtin:sphere", "--dims", "2", "--solver", "pso", "--budget",
                          "100", "--seed", "7"});
  REQUIRE(r.code == 0);
  const auto report = json::parse(r.out);
  CHECK(report["stats"]["num_evals"] == 100);
  CHECK(report["optimum"].get<double>() < 1.0);
  CHECK(report["solution"].size() == 2);
  std::set<std::string> keys;
  for (const auto& [k, _] : report.items()) keys.insert(k);
  CHECK(keys == std::set<std::string>{"optimum", "solution", "stats"});
  CHECK(std::holds_alternative<protocol::ResultMsg>(protocol::decode(r.out)));
}

TEST_CASE("tune is deterministic apart from the timing field") {
  const auto strip = [](const std::string& s) {
    auto j = json::parse(s);
    j["stats"]["time"] = 0;
    return j.dump();
  };
  const std::vector<std::string> args = {"tune", "--objective", "builtin:rosenbrock", "--solver", "cmaes", "--budget",
                                         "300", "--seed", "5"};
  CHECK(strip(cli_run(args).out) == strip(cli_run(args).out));
}

TEST_CASE("flag errors exit with code 2") {
  const auto bogus = cli_run({"tune", "--objective", "builtin:sphere", "--solver", "bogus", "--budget", "10"});
  CHECK(bogus.code == 2);
  CHECK(bogus.err.find("bogus") != std::string::npos);
  CHECK(cli_run({"tune", "--objective", "builtin:sphere"}).code == 2);
  CHECK(cli_run({"tune", "--objective", "builtin:nope", "--budget", "10"}).code == 2);
  CHECK(cli_run({"tune", "--objective", "exec:true", "--budget", "10"}).code == 2);
  CHECK(cli_run({"tune", "--objective", "exec:true", "--param", "x:1:0", "--budget", "10"}).code == 2);
  CHECK(cli_run({"tune", "--objective", "exec:true", "--param", "x:a:1", "--budget", "10"}).code == 2);
  CHECK(cli_run({"tune", "--objective", "builtin:sphere", "--budget", "10", "--setting", "inertia=1"}).code == 2);
  CHECK(cli_run({"tune", "--objective", "builtin:sphere", "--budget", "0"}).code == 2);
  CHECK(cli_run({"tune", "--objective", "builtin:sphere", "--budget", "5", "--direction", "up"}).code == 2);
  CHECK(cli_run({"tune", "--objective", "magic", "--budget", "5"}).code == 2);
  CHECK(cli_run({}).code == 2);
  CHECK(cli_run({"frobnicate"}).code == 2);
}

TEST_CASE("custom box for a built-in function and list settings") {
  const auto r = cli_run({"tune", "--objective", "builtin:sphere", "--dims", "2", "--param", "x0:-1:3", "--param",
                          "x1:0.5:2", "--solver", "grid", "--setting", "points_per_dim=5,3", "--budget", "15"});
  REQUIRE(r.code == 0);
  const auto report = json::parse(r.out);
  CHECK(report["solution"]["x0"] == 0.0);
  CHECK(report["solution"]["x1"] == 0.5);
  CHECK(report["optimum"] == 0.25);
}

TEST_CASE("branin with the default solver lands near the global minimum") {
  // Global minimum from a dense grid plus local refinement reference run.
  const double minimum = 0.397887357730;
  std::vector<double> best;
  for (int seed = 0; seed < 10; ++seed) {
    const auto r = cli_run({"tune", "--objective", "builtin:branin", "--solver", "pso", "--budget", "500", "--seed",
                            std::to_string(seed)});
    REQUIRE(r.code == 0);
    best.push_back(json::parse(r.out)["optimum"].get<double>());
  }
  std::sort(best.begin(), best.end());
  CHECK(0.5 * (best[4] + best[5]) - minimum <= 0.05);
  CHECK(make_test_function("branin", 2).minimum_value == doctest::Approx(minimum).epsilon(1e-12));
}

TEST_CASE("exec objective is invoked once per evaluation") {
  const auto dir = temp_dir();
  const auto counter = (dir / "calls").string();
  std::filesystem::remove(counter);
  // Echoes back x, so maximizing drives it to the upper bound.
  const auto cmd = "exec:echo . >> " + counter + "; sed -e 's/.*\"x\": *\\([-+0-9.eE]*\\).*/\\1/'";
  const auto report_path = (dir / "report.json").string();
  const auto r = cli_run({"tune", "--objective", cmd, "--param", "x:0:1", "--solver", "random", "--budget", "25",
                          "--seed", "3", "--output", report_path, "--parallelism", "4"});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  std::ifstream in(report_path);
  const auto report = json::parse(in);
  CHECK(report["stats"]["num_evals"] == 25);
  CHECK(report["optimum"].get<double>() > 0.8);
  CHECK(report["optimum"] == report["solution"]["x"]);
  std::ifstream calls(counter);
  std::size_t lines = 0;
  for (std::string l; std::getline(calls, l);) ++lines;
  CHECK(lines == 25);
}

TEST_CASE("exec objective that always fails exits with code 3") {
  const auto r = cli_run({"tune", "--objective", "exec:echo '{\"error\": \"no license\"}'", "--param", "x:0:1",
                          "--budget", "5"});
  CHECK(r.code == 3);
  CHECK(r.err.find("evaluations failed") != std::string::npos);
  CHECK(cli_run({"tune", "--objective", "exec:exit 1", "--param", "x:0:1", "--budget", "3"}).code == 3);
}

TEST_CASE("folds") {
  const auto r = cli_run({"folds", "--n", "10", "--k", "10"});
  REQUIRE(r.code == 0);
  const auto plan = json::parse(r.out);
  auto row = plan["assignments"][0].get<std::vector<std::size_t>>();
  std::sort(row.begin(), row.end());
  CHECK(row == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

  const auto c = cli_run({"folds", "--n", "12", "--k", "3", "--r", "4", "--clusters", "2,5,7", "--seed", "9"});
  REQUIRE(c.code == 0);
  const auto cp = json::parse(c.out);
  CHECK(cp["r"] == 4);
  for (const auto& a : cp["assignments"]) {
    CHECK(a[2] == a[5]);
    CHECK(a[5] == a[7]);
  }
  CHECK(cli_run({"folds", "--n", "12", "--k", "3", "--r", "4", "--clusters", "2,5,7", "--seed", "9"}).out == c.out);

  const auto s = cli_run({"folds", "--n", "8", "--k", "4", "--strata", "0,1,2,3;4,5"});
  REQUIRE(s.code == 0);
  std::set<std::size_t> folds;
  for (int i = 0; i < 4; ++i) folds.insert(json::parse(s.out)["assignments"][0][i].get<std::size_t>());
  CHECK(folds.size() == 4);

  CHECK(cli_run({"folds", "--n", "8", "--k", "2", "--strata", "0,1", "--clusters", "1,2"}).code == 2);
  CHECK(cli_run({"folds", "--n", "8", "--k", "2", "--clusters", "0,9"}).code == 2);
  CHECK(cli_run({"folds", "--n", "8", "--k", "9"}).code == 2);
  CHECK(cli_run({"folds", "--n", "8", "--k", "2", "--strata", "a,b"}).code == 2);
}

TEST_CASE("serve answers sessions, survives them and shuts down on SIGINT") {
  Child server({"serve", "--port", "0", "--timeout", "5"});
  const auto port = port_of(server.read_line());

  protocol::ConfigMsg config{.space = make_space({{"x", {0.0, 10.0}}})};
  config.max_evals = 40;
  config.seed = 7;
  const auto f = [](const ParamVector& p) { return -(p.at("x") - 3) * (p.at("x") - 3); };
  for (int round = 0; round < 2; ++round) {
    auto client = connect_tcp("127.0.0.1", port);
    const auto t = testing::run_echo_client(client, config, f);
    REQUIRE(t.result);
    CHECK(t.result->num_evals == 40);
    CHECK(t.result->solution == maximize(f, config.space, Budget{40}, std::nullopt, {.seed = 7}).best_params);
  }

  // A second server on the same port cannot bind.
  Child clash({"serve", "--port", std::to_string(port)});
  CHECK(clash.wait(10s) == 2);

  server.signal(SIGINT);
  CHECK(server.wait(10s) == 0);
}

TEST_CASE("serve exits cleanly on SIGTERM with a client still connected") {
  Child server({"serve"});
  const auto port = port_of(server.read_line());
  auto idle = connect_tcp("127.0.0.1", port);
  std::this_thread::sleep_for(100ms);
  server.signal(SIGTERM);
  CHECK(server.wait(10s) == 0);
}

TEST_CASE("help") {
  const auto r = cli_run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("tune") != std::string::npos);
}
