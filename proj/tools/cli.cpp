#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tunekit/cross_validation.hpp"
#include "tunekit/errors.hpp"
#include "tunekit/exec_objective.hpp"
#include "tunekit/optimize.hpp"
#include "tunekit/protocol.hpp"
#include "tunekit/session.hpp"
#include "tunekit/test_functions.hpp"

namespace tunekit::cli {

namespace {

/// Flag-level problem; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("cannot read '" + s + "' as a number in " + what);
  }
}

std::size_t to_index(const std::string& s, const std::string& what) {
  const double v = to_double(s, what);
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw UsageError("'" + s + "' is not a nonnegative integer in " + what);
  }
  return static_cast<std::size_t>(v);
}

Dimension parse_param(const std::string& spec) {
  // name:lower:upper, split from the right so negative bounds survive.
  const auto last = spec.rfind(':');
  const auto mid = last == std::string::npos || last == 0 ? std::string::npos : spec.rfind(':', last - 1);
  if (mid == std::string::npos || mid == 0) {
    throw UsageError("--param expects name:lower:upper, got '" + spec + "'");
  }
  return {spec.substr(0, mid), to_double(spec.substr(mid + 1, last - mid - 1), "--param " + spec),
          to_double(spec.substr(last + 1), "--param " + spec)};
}

Settings parse_settings(const std::vector<std::string>& specs) {
  Settings settings;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--setting expects key=value, got '" + spec + "'");
    const auto key = spec.substr(0, eq);
    const auto value = spec.substr(eq + 1);
    if (value.find(',') != std::string::npos) {
      std::vector<double> list;
      for (const auto& part : split(value, ',')) list.push_back(to_double(part, "--setting " + key));
      settings[key] = std::move(list);
    } else {
      settings[key] = to_double(value, "--setting " + key);
    }
  }
  return settings;
}

std::vector<IndexSet> parse_groups(const std::vector<std::string>& specs, const std::string& flag) {
  std::vector<IndexSet> groups;
  for (const auto& spec : specs) {
    for (const auto& group : split(spec, ';')) {
      if (group.empty()) continue;
      IndexSet set;
      for (const auto& idx : split(group, ',')) set.push_back(to_index(idx, flag));
      groups.push_back(std::move(set));
    }
  }
  return groups;
}

struct TuneFlags {
  std::string objective;
  std::size_t dims = 2;
  std::vector<std::string> params;
  std::string solver = "pso";
  std::vector<std::string> settings;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  std::string direction;
  std::string output;
  std::size_t parallelism = 1;
};

int cmd_tune(const TuneFlags& f, std::ostream& out, std::ostream& err) {
  std::unique_ptr<Objective> objective;
  std::optional<SearchSpace> space;
  std::string default_direction;
  try {
    const auto settings = parse_settings(f.settings);
    const SolverConfig config(f.solver, settings);

    std::vector<Dimension> dims;
    for (const auto& p : f.params) dims.push_back(parse_param(p));

    if (f.objective.rfind("builtin:", 0) == 0) {
      auto fn = make_test_function(f.objective.substr(8), f.dims);
      if (!dims.empty()) {
        if (dims.size() != fn.box.size()) {
          throw UsageError("builtin:" + fn.name + " takes " + std::to_string(fn.box.size()) + " parameters");
        }
        space = SearchSpace(dims);
      } else {
        space = fn.box;
      }
      objective = std::make_unique<FunctionObjective>(
          [fn](const ParamVector& p) { return fn.fn(p.values()); }, true);
      default_direction = "minimize";
    } else if (f.objective.rfind("exec:", 0) == 0) {
      if (dims.empty()) throw UsageError("exec objectives need at least one --param name:lower:upper");
      space = SearchSpace(dims);
      objective = std::make_unique<ExecObjective>(f.objective.substr(5));
      default_direction = "maximize";
    } else {
      throw UsageError("--objective must be builtin:<name> or exec:<command>");
    }
    if (f.budget == 0) throw UsageError("--budget must be at least 1");
    const auto direction = direction_from_string(f.direction.empty() ? default_direction : f.direction);

    RunOptions options{f.seed, std::max<std::size_t>(f.parallelism, 1), false};
    const auto result = optimize(config, *objective, *space, direction, Budget{f.budget}, options);
    const auto report = protocol::encode(protocol::make_result(result));
    if (f.output.empty()) {
      out << report << std::flush;
    } else {
      std::ofstream file(f.output);
      if (!file) {
        err << "error: cannot write " << f.output << "\n";
        return kUsage;
      }
      file << report;
    }
    return kOk;
  } catch (const BudgetExhaustedWithNoSuccess& e) {
    err << "error: " << e.what() << "\n";
    return kObjectiveFailed;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    // Configuration problems: unknown solver, bad space, bad settings.
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

struct FoldFlags {
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t r = 1;
  std::vector<std::string> strata;
  std::vector<std::string> clusters;
  std::uint64_t seed = 0;
};

int cmd_folds(const FoldFlags& f, std::ostream& out, std::ostream& err) {
  try {
    GroupingSpec grouping{parse_groups(f.strata, "--strata"), parse_groups(f.clusters, "--clusters")};
    const auto plan = generate_folds(f.n, f.k, f.r, grouping, f.seed);
    out << to_json(plan).dump() << "\n" << std::flush;
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

struct ServeFlags {
  int port = 0;
  std::string host = "127.0.0.1";
  double timeout = 300.0;
};

int cmd_serve(const ServeFlags& f, std::ostream& out, std::ostream& err, const std::atomic<bool>& stop) {
  if (f.port < 0 || f.port > 65535) {
    err << "error: port out of range\n";
    return kUsage;
  }
  std::unique_ptr<TcpListener> listener;
  try {
    listener = std::make_unique<TcpListener>(static_cast<std::uint16_t>(f.port), f.host);
  } catch (const Error& e) {
    err << "error: cannot listen on " << f.host << ":" << f.port << ": " << e.what() << "\n";
    return kUsage;
  }
  out << "PORT " << listener->port() << "\n" << std::flush;
  SessionOptions options;
  options.reply_timeout = std::chrono::milliseconds(static_cast<long long>(f.timeout * 1000.0));
  serve_forever(*listener, options, stop);
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const std::atomic<bool>& stop) {
  CLI::App app{"Budgeted black-box hyperparameter tuning"};
  app.require_subcommand(1);

  TuneFlags tune;
  auto* t = app.add_subcommand("tune", "Tune a built-in test function or an external command");
  t->add_option("--objective", tune.objective, "builtin:<sphere|rosenbrock|branin> or exec:<command>")
      ->required();
  t->add_option("--dims", tune.dims, "Dimensions of a built-in objective")->capture_default_str();
  t->add_option("--param", tune.params, "Hyperparameter box as name:lower:upper (repeatable)");
  t->add_option("--solver", tune.solver, "grid, random, nelder-mead, pso or cmaes")->capture_default_str();
  t->add_option("--setting", tune.settings, "Solver setting key=value or key=v1,v2 (repeatable)");
  t->add_option("--budget", tune.budget, "Maximum number of evaluations")->required();
  t->add_option("--seed", tune.seed, "Master seed")->capture_default_str();
  t->add_option("--direction", tune.direction,
                "maximize or minimize (default: minimize for builtin, maximize for exec)");
  t->add_option("--output", tune.output, "Write the JSON report here instead of stdout");
  t->add_option("--parallelism", tune.parallelism, "Concurrent evaluations per batch")->capture_default_str();

  ServeFlags serve;
  auto* s = app.add_subcommand("serve", "Serve tuning sessions over TCP (line-delimited JSON)");
  s->add_option("--port", serve.port, "Port to listen on (0 = ephemeral)")->capture_default_str();
  s->add_option("--host", serve.host, "IPv4 address to bind")->capture_default_str();
  s->add_option("--timeout", serve.timeout, "Seconds to wait for each reply")->capture_default_str();

  FoldFlags folds;
  auto* fo = app.add_subcommand("folds", "Print a cross-validation fold plan as JSON");
  fo->add_option("--n", folds.n, "Number of instances")->required();
  fo->add_option("--k", folds.k, "Number of folds")->required();
  fo->add_option("--r", folds.r, "Number of iterations")->capture_default_str();
  fo->add_option("--strata", folds.strata, "Strata as 'i,j,...;k,l,...' (repeatable)");
  fo->add_option("--clusters", folds.clusters, "Clusters as 'i,j,...;k,l,...' (repeatable)");
  fo->add_option("--seed", folds.seed, "Master seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  if (t->parsed()) return cmd_tune(tune, out, err);
  if (fo->parsed()) return cmd_folds(folds, out, err);
  return cmd_serve(serve, out, err, stop);
}

}  // namespace tunekit::cli
