#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "monoph/flows.hpp"
#include "monoph/integrator.hpp"
#include "test_problems.hpp"

using namespace monoph;
using testutil::oscillator;
using testutil::oscillator_forced;

namespace {

Eigen::VectorXd random_state(const Flow& flow, double radius, std::uint64_t seed) {
  std::uint64_t s = seed;
  Eigen::VectorXd dir = sample_ball(flow.space.dim(), 1.0, flow.space.weights(), s);
  const double nrm = flow.space.snorm(dir);
  if (nrm > 0.0) dir *= radius / nrm;
  return flow.steady + dir;
}

}  // namespace

TEST_CASE("plant specs") {
  SUBCASE("conserving benchmark") {
    const PlantSpec p = PlantSpec::conserving2d();
    Eigen::VectorXd z(2);
    z << 1.0, 0.0;
    // hand evaluation: M_p((1,0)) = (0, -2), so the drift is (0, 2)
    const Eigen::VectorXd r = plant_rhs(p, z, Eigen::VectorXd::Zero(1));
    CHECK(r[0] == 0.0);
    CHECK(r[1] == doctest::Approx(2.0));
    CHECK(p.M_p(Eigen::VectorXd::Zero(2)).norm() == 0.0);

    std::uint64_t s = 5;
    for (int rep = 0; rep < 1000; ++rep) {
      const Eigen::VectorXd v = sample_ball(2, 4.0, Eigen::VectorXd::Ones(2), s);
      const Eigen::VectorXd mv = p.M_p(v);
      CHECK(std::abs(mv.dot(v)) <= 1e-14 * (mv.norm() * v.norm() + 1e-300));
    }
  }
  SUBCASE("linear plant requires a monotone matrix") {
    Eigen::MatrixXd bad(2, 2);
    bad << -1.0, 0.0, 0.0, 1.0;
    Eigen::MatrixXd bp(2, 1);
    bp << 0.0, 1.0;
    CHECK_THROWS_AS(PlantSpec::linear(bad, bp), ShapeError);
    Eigen::MatrixXd ok(2, 2);
    ok << 0.1, 1.0, -1.0, 0.1;
    CHECK_NOTHROW(PlantSpec::linear(ok, bp));
  }
  SUBCASE("custom plant must vanish at the origin") {
    Eigen::MatrixXd bp(1, 1);
    bp << 1.0;
    auto shifted = [](const Eigen::VectorXd& z) {
      return Eigen::VectorXd(z.array() + 1.0);
    };
    CHECK_THROWS_AS(PlantSpec::custom(1, shifted, bp, MonotonicityKind::Pairwise), ShapeError);
  }
}

TEST_CASE("open-loop unconstrained flow") {
  OcpSpec spec = oscillator_forced(false, 1.0, 40);
  const Flow flow = build_open_unconstrained(spec);

  SUBCASE("the oracle point is an equilibrium") {
    CHECK(flow.space.snorm(flow.rhs(flow.steady)) <= 1e-8);
  }
  SUBCASE("zero data keeps the origin fixed") {
    OcpSpec zero = oscillator(false, 1.0, 20, 1.5, Eigen::Vector2d::Zero());
    const Flow zf = build_open_unconstrained(zero);
    CHECK(zf.rhs(Eigen::VectorXd::Zero(zf.space.dim())).norm() == 0.0);
  }
  SUBCASE("rhs differences are dissipative") {
    std::uint64_t s = 17;
    for (int rep = 0; rep < 200; ++rep) {
      const Eigen::VectorXd v1 = sample_ball(flow.space.dim(), 10.0, flow.space.weights(), s);
      const Eigen::VectorXd v2 = sample_ball(flow.space.dim(), 10.0, flow.space.weights(), s);
      const double pair = flow.space.sdot(flow.rhs(v1) - flow.rhs(v2), v1 - v2);
      CHECK(pair <= 1e-10 * flow.space.sdot(v1 - v2, v1 - v2));
    }
  }
  SUBCASE("affine structure reproduces the evaluation") {
    REQUIRE(flow.affine.has_value());
    std::uint64_t s = 3;
    const Eigen::VectorXd v = sample_ball(flow.space.dim(), 5.0, flow.space.weights(), s);
    const Eigen::VectorXd direct = flow.M.eval(v);
    const Eigen::VectorXd via_affine = flow.affine->L * v + flow.affine->b;
    CHECK((direct - via_affine).norm() <= 1e-12 * (1.0 + direct.norm()));
  }
  SUBCASE("feedback extraction is rejected") {
    CHECK_THROWS_AS(flow.feedback_u_p(flow.steady), UsageError);
  }
  SUBCASE("input port steers the multiplier rows") {
    const Eigen::VectorXd v = flow.steady;
    Eigen::VectorXd bumped = flow.input_default;
    bumped.tail(2) += Eigen::Vector2d(0.3, -0.4);
    const Eigen::VectorXd r = flow.rhs(v, bumped);
    // at the steady state the rhs is exactly the input perturbation
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(flow.space.dim());
    flow.space.view(expected, "lambda0") = Eigen::Vector2d(-0.3, 0.4);
    CHECK((r - expected).norm() <= 1e-7);
  }
}

TEST_CASE("open-loop constrained flow") {
  OcpSpec spec = oscillator(true);
  const Flow flow = build_open_constrained(spec);

  SUBCASE("requires a box") {
    OcpSpec boxless = oscillator(false);
    CHECK_THROWS_AS(build_open_constrained(boxless), UsageError);
  }
  SUBCASE("the constrained oracle point is an equilibrium") {
    CHECK(flow.space.snorm(flow.rhs(flow.steady)) <= 1e-7);
  }
  SUBCASE("zero data keeps the origin fixed") {
    OcpSpec zero = oscillator(true, 1.0, 20, 1.5, Eigen::Vector2d::Zero());
    const Flow zf = build_open_constrained(zero);
    CHECK(zf.rhs(Eigen::VectorXd::Zero(zf.space.dim())).norm() == 0.0);
  }
  SUBCASE("a wide box reduces to the unconstrained flow") {
    OcpSpec wide(spec.sys, spec.grid, spec.f, spec.x0, spec.cost,
                 BoxSet(Eigen::VectorXd::Constant(1, -1e9), Eigen::VectorXd::Constant(1, 1e9)));
    const Flow cflow = build_open_constrained(wide, false);
    const Flow uflow = build_open_unconstrained(wide, false);
    std::uint64_t s = 23;
    const Eigen::VectorXd w = sample_ball(cflow.space.dim(), 5.0, cflow.space.weights(), s);
    // lift to the unconstrained layout with u = (1/alpha) B^T lambda
    Eigen::VectorXd wu(uflow.space.dim());
    uflow.space.view(wu, "x") = cflow.space.view(w, "x");
    uflow.space.view(wu, "lambda") = cflow.space.view(w, "lambda");
    uflow.space.view(wu, "lambda0") = cflow.space.view(w, "lambda0");
    const auto lam = cflow.space.view(w, "lambda");
    Eigen::VectorXd u(spec.grid.N);
    for (int k = 0; k < spec.grid.N; ++k) {
      u.segment(k, 1) = spec.sys.B.transpose() * lam.segment(2 * k, 2) / spec.cost.alpha;
    }
    uflow.space.view(wu, "u") = u;

    const Eigen::VectorXd rc = cflow.rhs(w);
    const Eigen::VectorXd ru = uflow.rhs(wu);
    CHECK((cflow.space.view(rc, "x") - uflow.space.view(ru, "x")).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((cflow.space.view(rc, "lambda") - uflow.space.view(ru, "lambda")).cwiseAbs().maxCoeff() <=
          1e-10);
    CHECK((cflow.space.view(rc, "lambda0") - uflow.space.view(ru, "lambda0"))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
  }
}

TEST_CASE("closed-loop unconstrained flow") {
  OcpSpec spec = oscillator(false);
  const PlantSpec plant = PlantSpec::conserving2d();
  const Flow flow = build_closed_unconstrained(spec, plant);

  SUBCASE("origin is an equilibrium") {
    CHECK(flow.rhs(Eigen::VectorXd::Zero(flow.space.dim())).norm() == 0.0);
  }
  SUBCASE("coupling block is power neutral") {
    std::uint64_t s = 9;
    for (int rep = 0; rep < 100; ++rep) {
      const Eigen::VectorXd v = sample_ball(flow.space.dim(), 5.0, flow.space.weights(), s);
      const double p = flow.space.sdot(flow.K * v, v);
      CHECK(std::abs(p) <= 1e-12 * flow.space.sdot(v, v));
    }
  }
  SUBCASE("feedback is the scaled multiplier output") {
    const Eigen::VectorXd v = random_state(flow, 3.0, 31);
    const Eigen::VectorXd lam0 = flow.space.view(v, "lambda0");
    const Eigen::VectorXd want = spec.sys.B.transpose() * lam0 / spec.cost.alpha;
    CHECK((flow.feedback_u_p(v) - want).norm() == 0.0);
  }
  SUBCASE("pairwise monotone with a linear monotone plant") {
    Eigen::MatrixXd M(2, 2);
    M << 0.1, 1.0, -1.0, 0.1;
    Eigen::MatrixXd bp(2, 1);
    bp << 0.0, 1.0;
    const Flow lin = build_closed_unconstrained(spec, PlantSpec::linear(M, bp));
    const CertificateReport rep = certify_monotone(lin.M, 300, 10.0, 77);
    CHECK(rep.pass);
  }
  SUBCASE("relative monotone at the origin with the conserving plant") {
    CHECK(flow.M.kind == MonotonicityKind::RelativeAtZero);
    const CertificateReport rep = certify_monotone(flow.M, 300, 10.0, 78);
    CHECK(rep.pass);
  }
  SUBCASE("input dimension mismatch is rejected") {
    Eigen::MatrixXd bp(2, 2);
    bp << 1.0, 0.0, 0.0, 1.0;
    Eigen::MatrixXd M = 0.1 * Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(build_closed_unconstrained(spec, PlantSpec::linear(M, bp)), ShapeError);
  }
}

TEST_CASE("closed-loop constrained flow") {
  OcpSpec spec = oscillator(true);
  const PlantSpec plant = PlantSpec::conserving2d();
  const Flow flow = build_closed_constrained(spec, plant);

  SUBCASE("origin is an equilibrium") {
    CHECK(flow.rhs(Eigen::VectorXd::Zero(flow.space.dim())).norm() == 0.0);
  }
  SUBCASE("requires a symmetric box") {
    OcpSpec asym(spec.sys, spec.grid, spec.f, spec.x0, spec.cost,
                 BoxSet(Eigen::VectorXd::Constant(1, -0.5), Eigen::VectorXd::Constant(1, 1.0)));
    CHECK_THROWS_AS(build_closed_constrained(asym, plant), UsageError);
  }
  SUBCASE("relative monotonicity at the origin") {
    std::uint64_t s = 41;
    for (int rep = 0; rep < 300; ++rep) {
      const Eigen::VectorXd v = sample_ball(flow.space.dim(), 10.0, flow.space.weights(), s);
      CHECK(flow.space.sdot(flow.M.eval(v), v) >= -1e-10 * flow.space.sdot(v, v));
    }
  }
  SUBCASE("a wide box degenerates to the unsaturated output difference") {
    OcpSpec wide(spec.sys, spec.grid, spec.f, spec.x0, spec.cost,
                 BoxSet(Eigen::VectorXd::Constant(1, -1e9), Eigen::VectorXd::Constant(1, 1e9)));
    const Flow wf = build_closed_constrained(wide, plant);
    std::uint64_t s = 47;
    for (int rep = 0; rep < 100; ++rep) {
      const Eigen::VectorXd v = sample_ball(wf.space.dim(), 5.0, wf.space.weights(), s);
      const Eigen::VectorXd lam0 = wf.space.view(v, "lambda0");
      const Eigen::VectorXd want =
          0.5 * (spec.sys.B.transpose() * lam0 / spec.cost.alpha -
                 plant.B_p.transpose() * v.head(2));
      CHECK((wf.feedback_u_p(v) - want).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
  SUBCASE("feedback stays in the box for arbitrary states") {
    std::uint64_t s = 43;
    for (int rep = 0; rep < 500; ++rep) {
      const Eigen::VectorXd v = sample_ball(flow.space.dim(), 50.0, flow.space.weights(), s);
      const Eigen::VectorXd up = flow.feedback_u_p(v);
      CHECK(up[0] >= -1.0);
      CHECK(up[0] <= 1.0);
      CHECK(flow.feasibility_margin(v) >= 0.0);
    }
  }
  SUBCASE("saturated coupling matches the generic firmly-nonexpansive coupling") {
    // Route 1: subtract the uncoupled pieces from the assembled operator.
    // Route 2: the generic coupling construction on the same output maps.
    const int np = plant.n_p;
    const Flow open_c = build_open_constrained(
        OcpSpec(spec.sys, spec.grid, GridFunction(Layout::Intervals, 2, spec.grid),
                Eigen::Vector2d::Zero(), spec.cost, spec.box),
        false);

    const LinearOp G1 = make_op_dense(plant.B_p.transpose(), Eigen::VectorXd::Ones(np),
                                      Eigen::VectorXd::Ones(1));
    // G2 extracts (1/alpha) B^T lambda0 from the optimizer state
    Eigen::MatrixXd g2 = Eigen::MatrixXd::Zero(1, open_c.space.dim());
    const auto& l0 = open_c.space.block("lambda0");
    g2.block(0, l0.offset, 1, 2) = spec.sys.B.transpose() / spec.cost.alpha;
    const LinearOp G2 = make_op_dense(g2, open_c.space.weights(), Eigen::VectorXd::Ones(1));
    const MonotoneMap Kgen = build_prox_coupling(G1, G2, *spec.box, 0.5);

    std::uint64_t s = 51;
    for (int rep = 0; rep < 50; ++rep) {
      const Eigen::VectorXd v = sample_ball(flow.space.dim(), 8.0, flow.space.weights(), s);
      const Eigen::VectorXd coupled = flow.M.eval(v);
      Eigen::VectorXd plain(flow.space.dim());
      plain.head(np) = plant.M_p(v.head(np));
      plain.tail(open_c.space.dim()) = open_c.M.eval(v.tail(open_c.space.dim()));
      const Eigen::VectorXd route1 = coupled - plain;
      const Eigen::VectorXd route2 = Kgen.eval(v);
      CHECK((route1 - route2).cwiseAbs().maxCoeff() <= 1e-13 * (1.0 + route2.norm()));
    }
  }
}

TEST_CASE("closed-loop affine structure matches the evaluation for a linear plant") {
  OcpSpec spec = testutil::oscillator(false, 1.0, 30);
  Eigen::MatrixXd M(2, 2);
  M << 0.1, 1.0, -1.0, 0.1;
  Eigen::MatrixXd bp(2, 1);
  bp << 0.0, 1.0;
  const Flow flow = build_closed_unconstrained(spec, PlantSpec::linear(M, bp));
  REQUIRE(flow.affine.has_value());
  std::uint64_t s = 61;
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::VectorXd v = sample_ball(flow.space.dim(), 5.0, flow.space.weights(), s);
    const Eigen::VectorXd direct = flow.M.eval(v);
    const Eigen::VectorXd affine = flow.affine->L * v + flow.affine->b;
    CHECK((direct - affine).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + direct.norm()));
  }

  // implicit Euler is admissible on the affine closed loop
  IntegratorConfig cfg;
  cfg.method = StepMethod::ImplicitEuler;
  cfg.dt = 0.05;
  cfg.T = 2.0;
  cfg.record_every = 5;
  std::uint64_t s2 = 62;
  Eigen::VectorXd v0 = sample_ball(flow.space.dim(), 2.0, flow.space.weights(), s2);
  const Trajectory tr = integrate(flow, v0, cfg);
  for (std::size_t k = 1; k < tr.state_norm.size(); ++k) {
    CHECK(tr.state_norm[k] <= tr.state_norm[k - 1] + 1e-10 * tr.state_norm.front());
  }
}
