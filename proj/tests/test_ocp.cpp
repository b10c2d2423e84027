#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "monoph/ocp.hpp"
#include "test_problems.hpp"

using namespace monoph;
using testutil::oscillator;
using testutil::oscillator_forced;

TEST_CASE("grad_J basics") {
  OcpSpec spec = oscillator(false, 1.0, 20);
  GridFunction x(Layout::Nodes, 2, spec.grid);
  GridFunction u(Layout::Intervals, 1, spec.grid);

  SUBCASE("vanishes at the origin") {
    auto [gx, gu] = grad_J(spec, x, u);
    CHECK(gx.data().norm() == 0.0);
    CHECK(gu.data().norm() == 0.0);
  }
  SUBCASE("constant state reproduces itself on the quadrature nodes") {
    Eigen::VectorXd xbar(2);
    xbar << 0.3, -1.1;
    GridFunction xc = GridFunction::constant(Layout::Nodes, xbar, spec.grid);
    auto [gx, gu] = grad_J(spec, xc, u);
    for (int k = 1; k <= spec.grid.N; ++k) {
      CHECK((gx.sample(k) - xbar).norm() == doctest::Approx(0.0));
    }
    CHECK(gx.sample(0).norm() == 0.0);  // left endpoint carries no cost
  }
}

TEST_CASE("grad_J passes a central finite-difference check") {
  for (bool output_cost : {false, true}) {
    OcpSpec spec = oscillator(false, 1.0, 16);
    if (output_cost) {
      Eigen::MatrixXd C(1, 2);
      C << 1.0, 0.5;
      spec = OcpSpec(spec.sys, spec.grid, spec.f, spec.x0,
                     CostSpec::quadratic_output(C, 1.5), std::nullopt);
    }
    std::uint64_t s = 13;
    const double eps = 1e-6;
    for (int rep = 0; rep < 100; ++rep) {
      GridFunction x(Layout::Nodes, 2, spec.grid);
      GridFunction u(Layout::Intervals, 1, spec.grid);
      for (int i = 0; i < x.data().size(); ++i) x.data()[i] = rng_normal(s);
      for (int i = 0; i < u.data().size(); ++i) u.data()[i] = rng_normal(s);
      GridFunction dx(Layout::Nodes, 2, spec.grid);
      GridFunction du(Layout::Intervals, 1, spec.grid);
      for (int i = 0; i < dx.data().size(); ++i) dx.data()[i] = rng_normal(s);
      for (int i = 0; i < du.data().size(); ++i) du.data()[i] = rng_normal(s);

      auto shifted = [&](double t) {
        GridFunction xs(Layout::Nodes, 2, Eigen::VectorXd(x.data() + t * dx.data()));
        GridFunction us(Layout::Intervals, 1, Eigen::VectorXd(u.data() + t * du.data()));
        return cost_value(spec, xs, us);
      };
      const double fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
      auto [gx, gu] = grad_J(spec, x, u);
      const double pairing = spec.grid.dt * (gx.data().dot(dx.data()) + gu.data().dot(du.data()));
      CHECK(fd == doctest::Approx(pairing).epsilon(1e-6));
    }
  }
}

TEST_CASE("strict-convexity coercivity of the quadratic cost") {
  OcpSpec spec = oscillator(false, 1.0, 24);
  const double beta = std::min(1.0, spec.cost.alpha);
  std::uint64_t s = 3;
  for (int rep = 0; rep < 200; ++rep) {
    GridFunction x1(Layout::Nodes, 2, spec.grid), x2(Layout::Nodes, 2, spec.grid);
    GridFunction u1(Layout::Intervals, 1, spec.grid), u2(Layout::Intervals, 1, spec.grid);
    for (auto* g : {&x1, &x2}) {
      for (int i = 0; i < g->data().size(); ++i) g->data()[i] = 5.0 * rng_normal(s);
    }
    for (auto* g : {&u1, &u2}) {
      for (int i = 0; i < g->data().size(); ++i) g->data()[i] = 5.0 * rng_normal(s);
    }
    auto [gx1, gu1] = grad_J(spec, x1, u1);
    auto [gx2, gu2] = grad_J(spec, x2, u2);
    GridFunction dx(Layout::Nodes, 2, Eigen::VectorXd(x1.data() - x2.data()));
    GridFunction du(Layout::Intervals, 1, Eigen::VectorXd(u1.data() - u2.data()));
    GridFunction dgx(Layout::Nodes, 2, Eigen::VectorXd(gx1.data() - gx2.data()));
    GridFunction dgu(Layout::Intervals, 1, Eigen::VectorXd(gu1.data() - gu2.data()));
    const double lhs = inner_product(dgx, dx, spec.grid) + inner_product(dgu, du, spec.grid);
    const double nrm2 = inner_product(dx, dx, spec.grid) + inner_product(du, du, spec.grid);
    CHECK(lhs >= beta * nrm2 - 1e-10 * (1.0 + nrm2));
  }
}

TEST_CASE("M_opt vanishes at the origin") {
  OcpSpec spec = oscillator(false, 1.0, 10, 1.5, Eigen::Vector2d::Zero());
  MonotoneMap M = assemble_M_opt(spec);
  CHECK(M.eval(Eigen::VectorXd::Zero(M.dim)).norm() == 0.0);
}

TEST_CASE("M_opt monotonicity certificates") {
  OcpSpec unconstrained = oscillator_forced(false, 1.0, 24);
  const CertificateReport r1 = certify_monotone(assemble_M_opt(unconstrained), 1000, 10.0, 21);
  CHECK(r1.pass);

  OcpSpec constrained = oscillator_forced(true, 1.0, 24);
  const CertificateReport r2 = certify_monotone(assemble_M_opt(constrained), 1000, 10.0, 22);
  CHECK(r2.pass);
}

TEST_CASE("oracle on zero data returns the zero point") {
  OcpSpec spec = oscillator(false, 1.0, 20, 1.5, Eigen::Vector2d::Zero());
  KktSolveInfo info;
  const KktPoint p = solve_kkt(spec, &info);
  CHECK(p.x_star.data().norm() <= 1e-14);
  CHECK(p.u_star.data().norm() <= 1e-14);
  CHECK(p.lambda.data().norm() <= 1e-14);
  CHECK(p.mu.data().norm() == 0.0);
  CHECK(info.residual <= 1e-12);
}

TEST_CASE("unconstrained oracle satisfies the optimality system") {
  OcpSpec spec = oscillator_forced(false, 1.0, 60);
  KktSolveInfo info;
  const KktPoint p = solve_kkt(spec, &info);
  CHECK(info.residual <= 1e-10);
  CHECK(kkt_residual(spec, p) <= 1e-10);
  CHECK(p.mu.data().norm() == 0.0);  // no box: multipliers are identically zero

  // The assembled operator reproduces the optimality system at the oracle.
  MonotoneMap M = assemble_M_opt(spec);
  const StateSpace space = open_unconstrained_space(spec);
  Eigen::VectorXd w = kkt_to_state(spec, p, false);
  Eigen::VectorXd resid = M.eval(w);
  space.view(resid, "lambda") += spec.f.data();
  space.view(resid, "lambda0") += spec.x0;
  CHECK(space.snorm(resid) <= 1e-8);
}

TEST_CASE("constrained oracle on the oscillator box problem") {
  OcpSpec spec = oscillator(true);  // box +-1, alpha = 1.5
  KktSolveInfo info;
  const KktPoint p = solve_kkt(spec, &info);

  // feasibility is exact
  for (int j = 0; j < p.u_star.samples(); ++j) {
    CHECK(p.u_star.sample(j)[0] >= -1.0);
    CHECK(p.u_star.sample(j)[0] <= 1.0);
  }
  CHECK(info.residual <= 1e-8);
  CHECK(info.active_set_fraction > 0.0);  // this initial value saturates the control

  // u* = P_F((1/alpha) B^T lambda) with right-endpoint sampling
  double worst = 0.0;
  for (int k = 1; k <= spec.grid.N; ++k) {
    const Eigen::VectorXd c = spec.sys.B.transpose() * p.lambda.sample(k) / spec.cost.alpha;
    worst = std::max(worst, (p.u_star.sample(k - 1) - project_box(c, *spec.box)).norm());
  }
  CHECK(worst <= 1e-8);

  // mu lives in the normal cone: mu = B^T lambda - alpha u
  for (int k = 1; k <= spec.grid.N; ++k) {
    const Eigen::VectorXd want = spec.sys.B.transpose() * p.lambda.sample(k) -
                                 spec.cost.alpha * p.u_star.sample(k - 1);
    CHECK((p.mu.sample(k - 1) - want).norm() <= 1e-12);
  }

  // the prox-reduced operator vanishes at the oracle under the constant input
  MonotoneMap M = assemble_M_opt(spec);
  const StateSpace space = open_constrained_space(spec);
  Eigen::VectorXd w = kkt_to_state(spec, p, true);
  Eigen::VectorXd resid = M.eval(w);
  space.view(resid, "lambda") += spec.f.data();
  space.view(resid, "lambda0") += spec.x0;
  CHECK(space.snorm(resid) <= 1e-8);
}

TEST_CASE("two projected-gradient starts agree") {
  OcpSpec spec = oscillator(true, 1.0, 80);
  const KktPoint a = solve_kkt(spec);
  GridFunction start(Layout::Intervals, 1, spec.grid);
  std::uint64_t s = 55;
  for (int i = 0; i < start.data().size(); ++i) start.data()[i] = 3.0 * rng_normal(s);
  const KktPoint b = solve_kkt(spec, nullptr, &start);
  CHECK((a.u_star.data() - b.u_star.data()).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK((a.x_star.data() - b.x_star.data()).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("wide box reproduces the unconstrained optimum") {
  OcpSpec wide = oscillator_forced(false, 1.0, 50);
  OcpSpec boxed(wide.sys, wide.grid, wide.f, wide.x0, wide.cost,
                BoxSet(Eigen::VectorXd::Constant(1, -1e9), Eigen::VectorXd::Constant(1, 1e9)));
  const KktPoint a = solve_kkt(wide);
  const KktPoint b = solve_kkt(boxed);
  CHECK((a.u_star.data() - b.u_star.data()).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("kkt_residual responds to perturbations") {
  OcpSpec spec = oscillator(true, 1.0, 50);
  KktPoint p = solve_kkt(spec);
  const double base = kkt_residual(spec, p);

  // find an inactive component and perturb it
  int j = -1;
  for (int k = 0; k < p.u_star.samples(); ++k) {
    if (std::abs(p.u_star.sample(k)[0]) < 0.5) {
      j = k;
      break;
    }
  }
  REQUIRE(j >= 0);
  const double delta = 1e-3;
  p.u_star.sample(j)[0] += delta;
  const double grown = kkt_residual(spec, p);
  const double predicted = spec.cost.alpha * delta * std::sqrt(spec.grid.dt);
  CHECK(grown >= 0.99 * predicted);
  CHECK(grown <= 2.5 * predicted + base);

  // the zero point with nonzero data violates the state equation by ||x0||
  KktPoint zero{GridFunction(Layout::Nodes, 2, spec.grid),
                GridFunction(Layout::Intervals, 1, spec.grid),
                GridFunction(Layout::Nodes, 2, spec.grid), Eigen::VectorXd::Zero(2),
                GridFunction(Layout::Intervals, 1, spec.grid)};
  CHECK(kkt_residual(spec, zero) >= spec.x0.norm());
}

TEST_CASE("oracle rejects non-quadratic costs") {
  OcpSpec spec = oscillator(false, 1.0, 10);
  auto quartic = [](const Eigen::VectorXd& x) { return 0.25 * std::pow(x.squaredNorm(), 2); };
  auto quartic_grad = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(x.squaredNorm() * x);
  };
  OcpSpec custom(spec.sys, spec.grid, spec.f, spec.x0,
                 CostSpec::custom(quartic, quartic_grad, 1.5), std::nullopt);
  CHECK_THROWS_AS(solve_kkt(custom), UnsupportedError);
}

TEST_CASE("spec validation") {
  OcpSpec spec = oscillator(false, 1.0, 10);
  // wrong forcing layout
  CHECK_THROWS_AS(OcpSpec(spec.sys, spec.grid, GridFunction(Layout::Nodes, 2, spec.grid),
                          spec.x0, spec.cost, std::nullopt),
                  ShapeError);
  // box not containing zero
  CHECK_THROWS_AS(OcpSpec(spec.sys, spec.grid, spec.f, spec.x0, spec.cost,
                          BoxSet(Eigen::VectorXd::Constant(1, 0.5),
                                 Eigen::VectorXd::Constant(1, 1.0))),
                  ShapeError);
  // non-convex custom cost
  auto bad = [](const Eigen::VectorXd& x) { return -x.squaredNorm(); };
  auto bad_grad = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(-2.0 * x); };
  CHECK_THROWS_AS(OcpSpec(spec.sys, spec.grid, spec.f, spec.x0,
                          CostSpec::custom(bad, bad_grad, 1.0), std::nullopt),
                  ShapeError);
}
