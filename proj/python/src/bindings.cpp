#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <atomic>
#include <memory>
#include <thread>

#include <nlohmann/json.hpp>

#include "tunekit/constraints.hpp"
#include "tunekit/cross_validation.hpp"
#include "tunekit/errors.hpp"
#include "tunekit/metrics.hpp"
#include "tunekit/optimize.hpp"
#include "tunekit/protocol.hpp"
#include "tunekit/session.hpp"
#include "tunekit/solvers.hpp"
#include "tunekit/test_functions.hpp"

namespace py = pybind11;
using namespace tunekit;

namespace {

using Box = std::map<std::string, std::pair<double, double>>;

SearchSpace to_space(const Box& box) {
  std::map<std::string, std::pair<double, double>> m(box.begin(), box.end());
  return make_space(m);
}

py::dict to_dict(const ParamVector& p) {
  py::dict d;
  for (std::size_t i = 0; i < p.size(); ++i) d[py::str(p.names()[i])] = p.values()[i];
  return d;
}

py::list to_list(const std::vector<ParamVector>& points) {
  py::list out;
  for (const auto& p : points) out.append(to_dict(p));
  return out;
}

// Calls back into Python with the GIL held; a Python exception becomes a
// failed evaluation carrying its message.
class PyObjective : public Objective {
 public:
  explicit PyObjective(py::function fn) : fn_(std::move(fn)) {}

  double evaluate(const ParamVector& params) override {
    py::gil_scoped_acquire gil;
    try {
      return fn_(**to_dict(params)).cast<double>();
    } catch (py::error_already_set& e) {
      throw std::runtime_error(e.what());
    } catch (const py::cast_error&) {
      throw std::runtime_error("objective did not return a number");
    }
  }

 private:
  py::function fn_;
};

std::vector<Constraint> to_constraints(const std::vector<std::tuple<std::string, std::string, std::vector<double>>>& specs) {
  std::vector<Constraint> out;
  for (const auto& [kind, dim, bounds] : specs) {
    const auto k = constraint_kind_from_string(kind);
    if (k == ConstraintKind::range) {
      if (bounds.size() != 2) throw InvalidConstraint("range constraint needs two bounds");
      out.emplace_back(dim, bounds[0], bounds[1]);
    } else {
      if (bounds.size() != 1) throw InvalidConstraint(kind + " constraint needs one bound");
      out.emplace_back(k, dim, bounds[0]);
    }
  }
  return out;
}

OptimizationResult run(py::function f, const Box& box, std::size_t num_evals, const std::string& direction,
                       const std::optional<std::string>& solver, const Settings& settings, std::uint64_t seed,
                       const std::vector<std::tuple<std::string, std::string, std::vector<double>>>& constraints,
                       std::optional<double> default_value, bool dedupe) {
  const auto space = to_space(box);
  const auto config = solver ? SolverConfig(*solver, settings)
                             : (settings.empty() ? select_default_solver() : SolverConfig("pso", settings));
  const auto dir = direction_from_string(direction);
  std::shared_ptr<Objective> objective = std::make_shared<PyObjective>(std::move(f));
  const auto cs = to_constraints(constraints);
  if (!cs.empty()) {
    if (!default_value) throw InvalidConstraint("default_value is required when constraints are given");
    objective = wrap_constraints(objective, cs, *default_value);
  }
  py::gil_scoped_release release;
  return optimize(config, *objective, space, dir, Budget{num_evals}, {.seed = seed, .parallelism = 1, .dedupe = dedupe});
}

class Server {
 public:
  Server(int port, const std::string& host, double timeout)
      : listener_(static_cast<std::uint16_t>(port), host) {
    SessionOptions options;
    options.reply_timeout = std::chrono::milliseconds(static_cast<long long>(timeout * 1000.0));
    thread_ = std::thread([this, options] { serve_forever(listener_, options, stop_); });
  }
  ~Server() { stop(); }

  std::uint16_t port() const { return listener_.port(); }
  void stop() {
    stop_ = true;
    if (thread_.joinable()) {
      py::gil_scoped_release release;
      thread_.join();
    }
  }

 private:
  TcpListener listener_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Budgeted black-box hyperparameter search";

  auto base = py::register_exception<Error>(m, "TunekitError", PyExc_RuntimeError);
#define TUNEKIT_PY_ERROR(Name) py::register_exception<Name>(m, #Name, base)
  TUNEKIT_PY_ERROR(EmptySpace);
  TUNEKIT_PY_ERROR(InvalidBound);
  TUNEKIT_PY_ERROR(NameMismatch);
  TUNEKIT_PY_ERROR(BudgetExhaustedWithNoSuccess);
  TUNEKIT_PY_ERROR(SolverUnknown);
  TUNEKIT_PY_ERROR(InvalidSetting);
  TUNEKIT_PY_ERROR(GridTooLarge);
  TUNEKIT_PY_ERROR(CovarianceDegenerate);
  TUNEKIT_PY_ERROR(UnknownDimension);
  TUNEKIT_PY_ERROR(InvalidConstraint);
  TUNEKIT_PY_ERROR(InvalidFoldCount);
  TUNEKIT_PY_ERROR(OverlappingGroups);
  TUNEKIT_PY_ERROR(IndexOutOfRange);
  TUNEKIT_PY_ERROR(DegenerateLabels);
  TUNEKIT_PY_ERROR(LengthMismatch);
  TUNEKIT_PY_ERROR(EmptyInput);
  TUNEKIT_PY_ERROR(NonFiniteInput);
  TUNEKIT_PY_ERROR(UnknownMetric);
  TUNEKIT_PY_ERROR(MalformedJson);
  TUNEKIT_PY_ERROR(SchemaViolation);
  TUNEKIT_PY_ERROR(FoldFailure);
  TUNEKIT_PY_ERROR(Timeout);
  TUNEKIT_PY_ERROR(PeerClosed);
#undef TUNEKIT_PY_ERROR

  py::class_<OptimizationResult>(m, "Result")
      .def_property_readonly("solution", [](const OptimizationResult& r) { return to_dict(r.best_params); })
      .def_readonly("optimum", &OptimizationResult::best_score)
      .def_readonly("num_evals", &OptimizationResult::num_evals)
      .def_readonly("solver", &OptimizationResult::solver_name)
      .def_property_readonly("stop_reason", [](const OptimizationResult& r) { return to_string(r.stop_reason); })
      .def_property_readonly("time", [](const OptimizationResult& r) { return r.wall_time.count(); })
      .def_property_readonly("call_log",
                             [](const OptimizationResult& r) {
                               py::list out;
                               for (const auto& t : r.call_log) {
                                 py::dict d;
                                 d["params"] = to_dict(t.params);
                                 d["score"] = t.score ? py::cast(*t.score) : py::none();
                                 d["error"] = t.error;
                                 d["eval_index"] = t.eval_index;
                                 d["batch_id"] = t.batch_id;
                                 out.append(d);
                               }
                               return out;
                             })
      .def("__repr__", [](const OptimizationResult& r) {
        return "<Result optimum=" + std::to_string(r.best_score) + " num_evals=" + std::to_string(r.num_evals) +
               " solver=" + r.solver_name + ">";
      });

  m.def("optimize", &run, py::arg("f"), py::arg("space"), py::arg("num_evals"), py::arg("direction"),
        py::arg("solver") = py::none(), py::arg("settings") = Settings{}, py::arg("seed") = 0,
        py::arg("constraints") = std::vector<std::tuple<std::string, std::string, std::vector<double>>>{},
        py::arg("default_value") = py::none(), py::arg("dedupe") = false,
        "Runs a solver on f(**params) over the box {name: (lower, upper)}.");

  m.def("solver_names", &solver_names);
  m.def("default_solver", [] {
    const auto c = select_default_solver();
    return py::make_tuple(c.name(), c.settings());
  });
  m.def(
      "grid_generate",
      [](const Box& box, const std::vector<std::size_t>& points) { return to_list(grid_generate(to_space(box), points)); },
      py::arg("space"), py::arg("points_per_dim"));
  m.def(
      "random_generate",
      [](const Box& box, std::size_t count, std::uint64_t seed) {
        return to_list(random_generate(to_space(box), count, seed));
      },
      py::arg("space"), py::arg("count"), py::arg("seed") = 0);

  py::class_<FoldPlan>(m, "FoldPlan")
      .def_readonly("num_instances", &FoldPlan::num_instances)
      .def_readonly("num_folds", &FoldPlan::num_folds)
      .def_readonly("num_iter", &FoldPlan::num_iter)
      .def_readonly("assignments", &FoldPlan::assignments)
      .def("test_indices", &FoldPlan::test_indices, py::arg("iteration"), py::arg("fold"))
      .def("train_indices", &FoldPlan::train_indices, py::arg("iteration"), py::arg("fold"))
      .def("to_json", [](const FoldPlan& p) { return to_json(p).dump(); })
      .def("__eq__", [](const FoldPlan& a, const FoldPlan& b) { return a == b; });
  m.def(
      "generate_folds",
      [](std::size_t n, std::size_t k, std::size_t r, std::vector<IndexSet> strata, std::vector<IndexSet> clusters,
         std::uint64_t seed) { return generate_folds(n, k, r, {std::move(strata), std::move(clusters)}, seed); },
      py::arg("n"), py::arg("k"), py::arg("r") = 1, py::arg("strata") = std::vector<IndexSet>{},
      py::arg("clusters") = std::vector<IndexSet>{}, py::arg("seed") = 0);
  m.def(
      "cross_validated_score",
      [](const std::function<double(const IndexSet&, const IndexSet&)>& inner, const FoldPlan& plan) {
        return cross_validated_score(
            [&](std::span<const std::size_t> train, std::span<const std::size_t> test) {
              return inner(IndexSet(train.begin(), train.end()), IndexSet(test.begin(), test.end()));
            },
            plan);
      },
      py::arg("inner"), py::arg("plan"), "Mean of inner(train, test) over every (iteration, fold) cell.");

  m.def(
      "roc_auc",
      [](const std::vector<int>& labels, const std::vector<double>& scores) { return metrics::roc_auc(labels, scores); },
      py::arg("labels"), py::arg("scores"));
  m.def(
      "accuracy",
      [](const std::vector<int>& labels, const std::vector<int>& predicted) {
        return metrics::accuracy(labels, predicted);
      },
      py::arg("labels"), py::arg("predicted"));
  m.def(
      "mse",
      [](const std::vector<double>& targets, const std::vector<double>& predictions) {
        return metrics::mse(targets, predictions);
      },
      py::arg("targets"), py::arg("predictions"));
  m.def("metric_names", &metrics::metric_names);

  m.def(
      "normalize_message",
      [](const std::string& line) { return protocol::encode(protocol::decode(line)); },
      py::arg("line"), "Validates one protocol line and returns its canonical newline-terminated form.");

  m.def(
      "test_function",
      [](const std::string& name, std::size_t dims) {
        const auto tf = make_test_function(name, dims);
        Box box;
        for (const auto& d : tf.box.dims()) box[d.name] = {d.lower, d.upper};
        return py::make_tuple(box, tf.minimum_value);
      },
      py::arg("name"), py::arg("dims") = 2);
  m.def(
      "evaluate_test_function",
      [](const std::string& name, const std::vector<double>& x) {
        return make_test_function(name, x.size()).fn(x);
      },
      py::arg("name"), py::arg("x"));

  py::class_<Server>(m, "Server")
      .def(py::init<int, const std::string&, double>(), py::arg("port") = 0, py::arg("host") = "127.0.0.1",
           py::arg("timeout") = 300.0)
      .def_property_readonly("port", &Server::port)
      .def("stop", &Server::stop);
}
