#include "doctest.h"

#include <cmath>
#include <sstream>

#include "monoph/integrator.hpp"
#include "test_problems.hpp"

using namespace monoph;
using testutil::oscillator;

namespace {

// Tiny hand-made flows for integrator-level checks.
Flow scalar_flow(std::function<Eigen::VectorXd(const Eigen::VectorXd&)> M_eval, bool affine) {
  TimeGrid grid(1.0, 2);
  StateSpace space = SpaceBuilder(grid).vec_block("v", 1).finish();
  Flow flow(space);
  flow.K = Eigen::SparseMatrix<double, Eigen::RowMajor>(1, 1);
  flow.M.dim = 1;
  flow.M.weights = Eigen::VectorXd::Ones(1);
  flow.M.eval = std::move(M_eval);
  flow.steady = Eigen::VectorXd::Zero(1);
  if (affine) {
    Eigen::SparseMatrix<double, Eigen::RowMajor> L(1, 1);
    L.insert(0, 0) = 1.0;
    flow.affine = AffineMap{L, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
  }
  return flow;
}

}  // namespace

TEST_CASE("zero field gives a constant trajectory") {
  Flow flow = scalar_flow([](const Eigen::VectorXd& v) { return Eigen::VectorXd(0.0 * v); },
                          false);
  Eigen::VectorXd v0(1);
  v0 << 2.5;
  IntegratorConfig cfg;
  cfg.T = 3.0;
  cfg.dt = 0.01;
  cfg.record_every = 10;
  const Trajectory tr = integrate(flow, v0, cfg);
  for (const auto& v : tr.states) CHECK(v[0] == 2.5);
}

TEST_CASE("scalar decay hits the analytic solution") {
  Flow flow = scalar_flow([](const Eigen::VectorXd& v) { return v; }, true);
  Eigen::VectorXd v0(1);
  v0 << 1.0;
  IntegratorConfig cfg;
  cfg.T = 1.0;
  cfg.dt = 1e-3;
  cfg.record_every = 1000;
  const Trajectory tr = integrate(flow, v0, cfg);
  CHECK(std::abs(tr.states.back()[0] - std::exp(-1.0)) <= 1e-8);
}

TEST_CASE("RK4 order factor on the linear test problem") {
  Flow flow = scalar_flow([](const Eigen::VectorXd& v) { return v; }, true);
  Eigen::VectorXd v0(1);
  v0 << 1.0;
  auto err = [&](double dt) {
    IntegratorConfig cfg;
    cfg.T = 1.0;
    cfg.dt = dt;
    cfg.record_every = 1 << 20;
    return std::abs(integrate(flow, v0, cfg).states.back()[0] - std::exp(-1.0));
  };
  const double factor = err(0.05) / err(0.025);
  CHECK(factor >= 12.0);
  CHECK(factor <= 20.0);
}

TEST_CASE("divergence is reported with the step index") {
  // v' = v^2 blows up in finite time from v(0) = 10
  Flow flow = scalar_flow(
      [](const Eigen::VectorXd& v) { return Eigen::VectorXd(-v.array().square()); }, false);
  Eigen::VectorXd v0(1);
  v0 << 10.0;
  IntegratorConfig cfg;
  cfg.T = 2.0;
  cfg.dt = 0.05;
  cfg.record_every = 1;
  cfg.allow_unstable_dt = true;
  CHECK_THROWS_AS(integrate(flow, v0, cfg), DivergenceError);
}

TEST_CASE("shifted norm decreases along the open-loop flow") {
  OcpSpec spec = oscillator(false, 1.0, 60);
  const Flow flow = build_open_unconstrained(spec);
  std::uint64_t s = 12;
  Eigen::VectorXd dir = sample_ball(flow.space.dim(), 1.0, flow.space.weights(), s);
  dir *= 3.0 / flow.space.snorm(dir);
  IntegratorConfig cfg;
  cfg.T = 5.0;
  cfg.record_every = 50;
  const Trajectory tr = integrate(flow, Eigen::VectorXd(flow.steady + dir), cfg);
  for (std::size_t k = 1; k < tr.shifted_norm.size(); ++k) {
    CHECK(tr.shifted_norm[k] <= tr.shifted_norm[k - 1] + 1e-12 * tr.shifted_norm.front());
  }
  // the envelope decays like exp(-t/2); T = 5 gives roughly a factor 0.08
  CHECK(tr.shifted_norm.back() < 0.3 * tr.shifted_norm.front());
}

TEST_CASE("early stop on the rhs norm") {
  OcpSpec spec = oscillator(false, 1.0, 40);
  const Flow flow = build_open_unconstrained(spec);
  std::uint64_t s = 13;
  Eigen::VectorXd dir = sample_ball(flow.space.dim(), 1.0, flow.space.weights(), s);
  dir *= 2.0 / flow.space.snorm(dir);
  IntegratorConfig cfg;
  cfg.T = 100.0;
  cfg.record_every = 100;
  cfg.stop_tol = 1e-6;
  const Trajectory tr = integrate(flow, Eigen::VectorXd(flow.steady + dir), cfg);
  CHECK(tr.early_stopped);
  CHECK(tr.times.back() < 100.0);
  CHECK(flow.space.snorm(flow.rhs(tr.states.back())) <= 1e-6);
}

TEST_CASE("implicit Euler requires an affine flow") {
  OcpSpec spec = oscillator(true, 1.0, 30);
  const Flow flow = build_open_constrained(spec);
  IntegratorConfig cfg;
  cfg.method = StepMethod::ImplicitEuler;
  cfg.T = 1.0;
  cfg.dt = 0.1;
  CHECK_THROWS_AS(integrate(flow, flow.steady, cfg), UnsupportedError);
}

TEST_CASE("implicit Euler contracts towards the optimum for any step size") {
  OcpSpec spec = oscillator(false, 1.0, 50);
  const Flow flow = build_open_unconstrained(spec);
  std::uint64_t s = 14;
  Eigen::VectorXd dir = sample_ball(flow.space.dim(), 1.0, flow.space.weights(), s);
  dir *= 5.0 / flow.space.snorm(dir);
  for (double dt : {0.01, 0.1, 1.0}) {
    IntegratorConfig cfg;
    cfg.method = StepMethod::ImplicitEuler;
    cfg.dt = dt;
    cfg.T = 30 * dt;
    cfg.record_every = 1;
    const Trajectory tr = integrate(flow, Eigen::VectorXd(flow.steady + dir), cfg);
    for (std::size_t k = 1; k < tr.shifted_norm.size(); ++k) {
      CHECK(tr.shifted_norm[k] <= tr.shifted_norm[k - 1] + 1e-10 * tr.shifted_norm.front());
    }
  }
}

TEST_CASE("step-size guard") {
  OcpSpec spec = oscillator(false, 1.0, 50);
  const Flow flow = build_open_unconstrained(spec);
  IntegratorConfig cfg;
  cfg.T = 0.1;
  cfg.dt = 1.0;  // far above the stability cap for this stiffness
  CHECK_THROWS_AS(integrate(flow, flow.steady, cfg), UsageError);
  cfg.allow_unstable_dt = true;
  CHECK_NOTHROW(integrate(flow, flow.steady, cfg));  // steady state stays finite
}

TEST_CASE("integration is deterministic") {
  OcpSpec spec = oscillator(true, 1.0, 30);
  const Flow flow = build_open_constrained(spec);
  std::uint64_t s = 15;
  Eigen::VectorXd dir = sample_ball(flow.space.dim(), 1.0, flow.space.weights(), s);
  IntegratorConfig cfg;
  cfg.T = 1.0;
  cfg.record_every = 20;
  const Trajectory a = integrate(flow, Eigen::VectorXd(flow.steady + dir), cfg);
  const Trajectory b = integrate(flow, Eigen::VectorXd(flow.steady + dir), cfg);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    CHECK((a.states[k] - b.states[k]).cwiseAbs().maxCoeff() == 0.0);
  }
  std::ostringstream ca, cb;
  write_trajectory_csv(a, ca);
  write_trajectory_csv(b, cb);
  CHECK(ca.str() == cb.str());
}

TEST_CASE("trajectory CSV shape") {
  OcpSpec spec = oscillator(true, 1.0, 20);
  const PlantSpec plant = PlantSpec::conserving2d();
  const Flow flow = build_closed_constrained(spec, plant);
  Eigen::VectorXd v0 = Eigen::VectorXd::Zero(flow.space.dim());
  v0[0] = -0.5;
  v0[1] = -3.0;
  IntegratorConfig cfg;
  cfg.T = 0.05;
  cfg.record_every = 10;
  const Trajectory tr = integrate(flow, v0, cfg);
  std::ostringstream os;
  write_trajectory_csv(tr, os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header ==
        "t,state_norm,shifted_norm,plant_norm,dissipation_rate,u_p_0,feasibility_margin");
  int rows = 0;
  std::string line;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == static_cast<int>(tr.times.size()));
}

TEST_CASE("decay-rate estimator rejects nonpositive channels") {
  std::vector<double> t{0.0, 1.0, 2.0};
  std::vector<double> c{1.0, 0.0, 1.0};
  CHECK_THROWS_AS(estimate_decay_rate(t, c, 0.0, 2.0), UsageError);
  std::vector<double> ok{1.0, 0.5, 0.25};
  CHECK(estimate_decay_rate(t, ok, 0.0, 2.0) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));
}
