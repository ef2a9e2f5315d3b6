#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "tunekit/errors.hpp"
#include "tunekit/optimize.hpp"
#include "tunekit/solvers.hpp"
#include "tunekit/test_functions.hpp"

using namespace tunekit;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

FunctionObjective sphere_objective() {
  return FunctionObjective([](const ParamVector& p) { return sphere(p.values()); });
}

}  // namespace

TEST_CASE("grid examples") {
  const auto two = make_space({{"a", {0.0, 1.0}}, {"b", {-1.0, 1.0}}});
  const auto g = grid_generate(two, {3, 3});
  REQUIRE(g.size() == 9);
  CHECK(g[0].values() == std::vector<double>{0.0, -1.0});
  CHECK(g[1].values() == std::vector<double>{0.0, 0.0});
  CHECK(g[3].values() == std::vector<double>{0.5, -1.0});
  CHECK(g[8].values() == std::vector<double>{1.0, 1.0});

  const auto one = make_space({{"x", {0.0, 10.0}}});
  const auto line = grid_generate(one, {3});
  REQUIRE(line.size() == 3);
  CHECK(line[0].at("x") == 0.0);
  CHECK(line[1].at("x") == 5.0);
  CHECK(line[2].at("x") == 10.0);

  CHECK(grid_generate(one, {1})[0].at("x") == 5.0);
  CHECK_THROWS_AS(grid_generate(one, {0}), InvalidSetting);
  CHECK_THROWS_AS(grid_generate(one, {2, 2}), InvalidSetting);
}

TEST_CASE("grid value sets are per-dimension linspaces") {
  const auto space = make_space({{"a", {-2.0, 2.0}}, {"b", {0.0, 3.0}}, {"c", {1.0, 1.0}}});
  const auto g = grid_generate(space, {5, 4, 7});
  CHECK(g.size() == 20);
  std::set<double> a, b, c;
  for (const auto& p : g) {
    a.insert(p.at("a"));
    b.insert(p.at("b"));
    c.insert(p.at("c"));
  }
  CHECK(a == std::set<double>{-2.0, -1.0, 0.0, 1.0, 2.0});
  CHECK(b == std::set<double>{0.0, 1.0, 2.0, 3.0});
  CHECK(c == std::set<double>{1.0});
}

TEST_CASE("grid larger than the budget is rejected") {
  const auto space = make_space({{"a", {0.0, 1.0}}, {"b", {0.0, 1.0}}});
  auto f = sphere_objective();
  CHECK_THROWS_AS(optimize(SolverConfig("grid", {{"points_per_dim", 4.0}}), f, space, Direction::minimize,
                           Budget{15}),
                  GridTooLarge);
  const auto r = optimize(SolverConfig("grid", {{"points_per_dim", std::vector<double>{4, 2}}}), f, space,
                          Direction::minimize, Budget{8});
  CHECK(r.num_evals == 8);
  CHECK(r.stop_reason == StopReason::completed);
}

TEST_CASE("default grid resolution") {
  const auto space = make_space({{"a", {0.0, 1.0}}, {"b", {0.0, 1.0}}, {"k", {2.0, 2.0}}});
  CHECK(default_grid_points(space, 100) == 10);
  CHECK(default_grid_points(space, 99) == 9);
  CHECK(default_grid_points(space, 1) == 1);
  const auto cube = make_space({{"a", {0.0, 1.0}}, {"b", {0.0, 1.0}}, {"c", {0.0, 1.0}}});
  CHECK(default_grid_points(cube, 64) == 4);
  CHECK(default_grid_points(cube, 63) == 3);
}

TEST_CASE("grid batch_size splits evaluation batches") {
  const auto space = make_space({{"x", {0.0, 1.0}}});
  auto f = sphere_objective();
  const auto r = optimize(SolverConfig("grid", {{"batch_size", 4.0}}), f, space, Direction::minimize, Budget{10});
  REQUIRE(r.num_evals == 10);
  CHECK(r.call_log[3].batch_id == 0);
  CHECK(r.call_log[4].batch_id == 1);
  CHECK(r.call_log[9].batch_id == 2);
}

TEST_CASE("random samples are feasible, seeded and uniform") {
  const auto space = make_space({{"u", {0.0, 1.0}}, {"v", {-3.0, 7.0}}, {"w", {4.0, 4.0}}});
  const auto a = random_generate(space, 10000, 21);
  const auto b = random_generate(space, 10000, 21);
  CHECK(a == b);
  CHECK(random_generate(space, 5, 22) != random_generate(space, 5, 21));

  std::vector<double> u, v;
  for (const auto& p : a) {
    REQUIRE(contains(space, p));
    CHECK(p.at("w") == 4.0);
    u.push_back(p.at("u"));
    v.push_back(p.at("v"));
  }
  const double mean = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size());
  CHECK(std::abs(mean - 0.5) <= 0.015);
  CHECK(testing::ks_uniform(u, 0.0, 1.0) < testing::ks_critical_1pct(u.size()));
  CHECK(testing::ks_uniform(v, -3.0, 7.0) < testing::ks_critical_1pct(v.size()));
  CHECK_THROWS_AS(random_generate(space, 0, 1), InvalidSetting);
}

TEST_CASE("nelder-mead on the sphere from (1,1)") {
  const auto space = make_space({{"x", {-5.0, 5.0}}, {"y", {-5.0, 5.0}}});
  auto f = sphere_objective();
  const auto r = optimize(SolverConfig("nelder-mead", {{"start", std::vector<double>{1, 1}}, {"tol", 1e-8}}), f,
                          space, Direction::minimize, Budget{5000});
  CHECK(r.stop_reason == StopReason::converged);
  CHECK(std::abs(r.best_params.at("x")) < 1e-6);
  CHECK(std::abs(r.best_params.at("y")) < 1e-6);
}

TEST_CASE("nelder-mead on rosenbrock from (-1.2, 1)") {
  // Reference local search converges to (1, 1), the analytic minimizer.
  const auto tf = make_test_function("rosenbrock", 2);
  FunctionObjective f([&](const ParamVector& p) { return tf(p); });
  const auto r = optimize(SolverConfig("nelder-mead", {{"start", std::vector<double>{-1.2, 1.0}}}), f, tf.box,
                          Direction::minimize, Budget{2000});
  CHECK(r.num_evals <= 2000);
  CHECK(std::abs(r.best_params.values()[0] - 1.0) < 1e-3);
  CHECK(std::abs(r.best_params.values()[1] - 1.0) < 1e-3);
}

TEST_CASE("nelder-mead started at the minimum with a tiny simplex stops at once") {
  const auto space = make_space({{"x", {-5.0, 5.0}}, {"y", {-5.0, 5.0}}});
  auto f = sphere_objective();
  EvalContext ctx(f, space, Direction::minimize, Budget{100});
  NelderMeadSettings s;
  s.start = std::vector<double>{0.0, 0.0};
  s.step_fraction = 1e-10;
  NelderMead nm(ctx, s);
  const auto stop = nm.step();
  REQUIRE(stop);
  CHECK(*stop == StopReason::converged);
  const auto st = nm.state();
  CHECK(st.vertices.front().params.values() == std::vector<double>{0.0, 0.0});
  CHECK(ctx.num_evals() == 3);
}

TEST_CASE("nelder-mead simplex invariants") {
  const auto tf = make_test_function("rosenbrock", 3);
  FunctionObjective f([&](const ParamVector& p) { return tf(p); });
  EvalContext ctx(f, tf.box, Direction::minimize, Budget{600});
  NelderMead nm(ctx, {});
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    const auto stop = nm.step();
    const auto st = nm.state();
    REQUIRE(st.vertices.size() == 4);
    for (std::size_t i = 1; i < st.vertices.size(); ++i) {
      CHECK(st.vertices[i - 1].loss <= st.vertices[i].loss);
    }
    for (const auto& v : st.vertices) CHECK(contains(tf.box, v.params));
    CHECK(st.vertices.front().loss <= best);
    best = st.vertices.front().loss;
    if (stop) break;
  }
}

TEST_CASE("nelder-mead survives a simplex flattened against the bounds") {
  // Minimum sits in a corner, so clamping collapses vertices onto the faces.
  const auto space = make_space({{"x", {0.0, 1.0}}, {"y", {0.0, 1.0}}});
  FunctionObjective f([](const ParamVector& p) {
    return std::pow(p.at("x") + 1.0, 2) + std::pow(p.at("y") + 1.0, 2);
  });
  const auto r = minimize(f, space, Budget{3000}, SolverConfig("nelder-mead"));
  CHECK(r.best_params.at("x") < 1e-6);
  CHECK(r.best_params.at("y") < 1e-6);
}

TEST_CASE("pso accounting") {
  const auto space = make_space({{"x", {-5.0, 5.0}}, {"y", {-5.0, 5.0}}});
  auto f = sphere_objective();
  EvalContext ctx(f, space, Direction::minimize, Budget{1000}, {.seed = 3});
  ParticleSwarm pso(ctx, PsoSettings::from(select_default_solver()));
  std::size_t steps = 0;
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    const auto stop = pso.step();
    ++steps;
    const auto& st = pso.state();
    CHECK(st.particles.size() == 20);
    for (const auto& p : st.particles) {
      CHECK(contains(space, space.make_point(p.position)));
      CHECK(st.global_best_loss <= p.best_loss);
    }
    CHECK(st.global_best_loss <= best);
    best = st.global_best_loss;
    if (stop) {
      CHECK(*stop == StopReason::budget);
      break;
    }
  }
  CHECK(pso.state().generation == 50);
  CHECK(ctx.num_evals() == 1000);
  CHECK(steps == 50);
}

TEST_CASE("pso leaves a partial generation unspent") {
  const auto space = make_space({{"x", {-5.0, 5.0}}});
  auto f = sphere_objective();
  const auto r = optimize(SolverConfig("pso", {{"num_particles", 8.0}}), f, space, Direction::minimize, Budget{30});
  CHECK(r.num_evals == 24);
}

TEST_CASE("pso settings validation") {
  CHECK(PsoSettings::from(SolverConfig("pso", {{"num_particles", 7.0}})).num_particles == 7);
  CHECK_THROWS_AS(PsoSettings::from(SolverConfig("pso", {{"num_particles", 2.5}})), InvalidSetting);
  CHECK_THROWS_AS(PsoSettings::from(SolverConfig("pso", {{"vmax_fraction", 0.0}})), InvalidSetting);
}

TEST_CASE("pso on the 5-d sphere") {
  // Regression bound from the observed median over seeds 0..19.
  const auto tf = make_test_function("sphere", 5);
  std::vector<double> best;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    best.push_back(minimize([&](const ParamVector& p) { return tf(p); }, tf.box, Budget{1000}, std::nullopt,
                            {.seed = seed})
                       .best_score);
  }
  CHECK(median(best) <= 1e-2);
}

TEST_CASE("cmaes invariants hold every generation") {
  const auto tf = make_test_function("rosenbrock", 4);
  FunctionObjective f([&](const ParamVector& p) { return tf(p); });
  EvalContext ctx(f, tf.box, Direction::minimize, Budget{3000}, {.seed = 17});
  Cmaes es(ctx, CmaesSettings::from(SolverConfig("cmaes")));
  CHECK(es.lambda() == 8);
  while (true) {
    const auto stop = es.step();
    const auto& st = es.state();
    CHECK(st.sigma > 0.0);
    CHECK((st.covariance - st.covariance.transpose()).norm() == 0.0);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    if (stop) break;
  }
}

TEST_CASE("cmaes population size follows 4 + floor(3 ln n)") {
  for (const auto& [n, expected] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 4}, {2, 6}, {10, 10}, {20, 12}}) {
    const auto tf = make_test_function("sphere", n);
    FunctionObjective f([&](const ParamVector& p) { return tf(p); });
    EvalContext ctx(f, tf.box, Direction::minimize, Budget{100});
    CHECK(Cmaes(ctx, {}).lambda() == expected);
  }
}

TEST_CASE("cmaes on the 10-d sphere from (1,...,1)") {
  const auto tf = make_test_function("sphere", 10);
  FunctionObjective f([&](const ParamVector& p) { return tf(p); });
  const auto r = optimize(SolverConfig("cmaes", {{"sigma0", 0.5}, {"start", std::vector<double>(10, 1.0)}}), f,
                          tf.box, Direction::minimize, Budget{5000}, {.seed = 1});
  CHECK(r.best_score <= 1e-8);
}

TEST_CASE("cmaes beats random search on an ill-conditioned ellipsoid") {
  const auto space = make_space({{"x0", {-5.0, 5.0}}, {"x1", {-5.0, 5.0}}, {"x2", {-5.0, 5.0}}, {"x3", {-5.0, 5.0}}});
  FunctionObjective f([](const ParamVector& p) {
    const auto& x = p.values();
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::pow(1e4, static_cast<double>(i) / 3.0) * x[i] * x[i];
    return s;
  });
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto es = minimize(f, space, Budget{400}, SolverConfig("cmaes"), {.seed = seed});
    const auto rs = minimize(f, space, Budget{400}, SolverConfig("random"), {.seed = seed});
    wins += es.best_score < rs.best_score;
  }
  CHECK(wins == 20);
}

TEST_CASE("cmaes respects non-cubic boxes") {
  const auto space = make_space({{"a", {0.0, 1000.0}}, {"b", {-0.01, 0.01}}});
  FunctionObjective f([](const ParamVector& p) {
    return std::pow((p.at("a") - 700.0) / 1000.0, 2) + std::pow((p.at("b") - 0.004) / 0.02, 2);
  });
  const auto r = minimize(f, space, Budget{2000}, SolverConfig("cmaes"), {.seed = 2});
  CHECK(std::abs(r.best_params.at("a") - 700.0) < 1e-2);
  CHECK(std::abs(r.best_params.at("b") - 0.004) < 1e-7);
}

TEST_CASE("cmaes settings validation") {
  CHECK_THROWS_AS(CmaesSettings::from(SolverConfig("cmaes", {{"sigma0", 0.0}})), InvalidSetting);
  CHECK_THROWS_AS(CmaesSettings::from(SolverConfig("cmaes", {{"lambda", 1.0}})), InvalidSetting);
  CHECK(CmaesSettings::from(SolverConfig("cmaes", {{"lambda", 12.0}})).lambda == 12u);
}

TEST_CASE("default solver") {
  const auto d = select_default_solver();
  CHECK(d.name() == "pso");
  CHECK(d.number("num_particles", 0) == 20);
  CHECK(d.number("w", 0) == 0.729);
  CHECK(d.number("c1", 0) == 1.49445);
  CHECK(d.number("c2", 0) == 1.49445);
  CHECK(solver_names() == std::vector<std::string>{"grid", "random", "nelder-mead", "pso", "cmaes"});
}
