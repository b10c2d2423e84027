#include "doctest.h"

#include <cmath>
#include <sstream>

#include "monoph/monotone.hpp"
#include "monoph/timegrid.hpp"

using namespace monoph;

TEST_CASE("time grid invariants") {
  TimeGrid g(2.0, 10);
  CHECK(g.dt == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(g.dt * g.N == doctest::Approx(g.t_f).epsilon(1e-15));
  CHECK(g.samples(Layout::Nodes) == 11);
  CHECK(g.samples(Layout::Intervals) == 10);
  CHECK(g.tau(Layout::Nodes, 0) == 0.0);
  CHECK(g.tau(Layout::Intervals, 0) == doctest::Approx(0.2));
  CHECK_THROWS_AS(TimeGrid(1.0, 1), ShapeError);
  CHECK_THROWS_AS(TimeGrid(-1.0, 10), ShapeError);
}

TEST_CASE("inner product of constants is exact quadrature") {
  TimeGrid g(1.0, 10);
  const GridFunction one = GridFunction::constant(Layout::Intervals, Eigen::VectorXd::Ones(1), g);
  CHECK(inner_product(one, one, g) == doctest::Approx(1.0).epsilon(1e-15));

  const GridFunction zero(Layout::Intervals, 1, g);
  CHECK(inner_product(zero, one, g) == 0.0);
}

TEST_CASE("inner product matches the analytic sine integral") {
  TimeGrid g(M_PI, 1000);
  GridFunction a(Layout::Intervals, 1, g);
  for (int j = 0; j < a.samples(); ++j) a.sample(j)[0] = std::sin(g.tau(Layout::Intervals, j));
  CHECK(inner_product(a, a, g) == doctest::Approx(M_PI / 2.0).epsilon(1e-3));
}

TEST_CASE("norm basics") {
  TimeGrid g(2.0, 16);
  CHECK(norm(GridFunction(Layout::Nodes, 3, g), g) == 0.0);
  const GridFunction c = GridFunction::constant(Layout::Intervals,
                                                Eigen::VectorXd::Constant(1, -2.5), g);
  CHECK(norm(c, g) == doctest::Approx(2.5 * std::sqrt(2.0)).epsilon(1e-14));

  std::uint64_t s = 7;
  GridFunction r(Layout::Intervals, 2, g);
  for (int i = 0; i < r.data().size(); ++i) r.data()[i] = rng_normal(s);
  CHECK(norm(r, g) == doctest::Approx(std::sqrt(inner_product(r, r, g))).epsilon(1e-14));
}

TEST_CASE("nodes quadrature excludes the left endpoint") {
  TimeGrid g(1.0, 4);
  GridFunction a(Layout::Nodes, 1, g);
  a.sample(0)[0] = 100.0;  // invisible to the quadrature pairing
  CHECK(inner_product(a, a, g) == 0.0);
  a.sample(2)[0] = 3.0;
  CHECK(inner_product(a, a, g) == doctest::Approx(0.25 * 9.0).epsilon(1e-15));
}

TEST_CASE("stack_inner blocks") {
  TimeGrid g(1.0, 8);
  SUBCASE("all parts zero") {
    std::vector<StackPart> parts{GridFunction(Layout::Intervals, 2, g),
                                 Eigen::VectorXd(Eigen::VectorXd::Zero(3))};
    CHECK(stack_inner(parts, g) == 0.0);
  }
  SUBCASE("single euclidean part") {
    Eigen::VectorXd v(3);
    v << 1.0, -2.0, 2.0;
    std::vector<StackPart> parts{v};
    CHECK(stack_inner(parts, g) == doctest::Approx(9.0).epsilon(1e-15));
  }
  SUBCASE("mixed parts split into independent blocks") {
    std::uint64_t s = 3;
    GridFunction gf(Layout::Intervals, 2, g);
    for (int i = 0; i < gf.data().size(); ++i) gf.data()[i] = rng_normal(s);
    Eigen::VectorXd v(4);
    for (int i = 0; i < 4; ++i) v[i] = rng_normal(s);
    std::vector<StackPart> parts{gf, v};
    CHECK(stack_inner(parts, g) ==
          doctest::Approx(inner_product(gf, gf, g) + v.dot(v)).epsilon(1e-14));
  }
  SUBCASE("empty list rejected") {
    std::vector<StackPart> parts;
    CHECK_THROWS_AS(stack_inner(parts, g), ShapeError);
  }
}

TEST_CASE("inner product bilinearity, symmetry, Cauchy-Schwarz, parallelogram") {
  TimeGrid g(3.0, 25);
  std::uint64_t s = 99;
  auto rand_gf = [&](Layout l, int d) {
    GridFunction r(l, d, g);
    for (int i = 0; i < r.data().size(); ++i) r.data()[i] = rng_normal(s);
    return r;
  };
  for (int rep = 0; rep < 20; ++rep) {
    const GridFunction a = rand_gf(Layout::Nodes, 2);
    const GridFunction b = rand_gf(Layout::Nodes, 2);
    const GridFunction c = rand_gf(Layout::Nodes, 2);
    const double al = rng_normal(s), be = rng_normal(s);

    GridFunction lin(Layout::Nodes, 2, Eigen::VectorXd(al * a.data() + be * b.data()));
    const double lhs = inner_product(lin, c, g);
    const double rhs = al * inner_product(a, c, g) + be * inner_product(b, c, g);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

    CHECK(inner_product(a, b, g) == doctest::Approx(inner_product(b, a, g)).epsilon(1e-13));

    CHECK(std::abs(inner_product(a, b, g)) <= norm(a, g) * norm(b, g) + 1e-12);

    GridFunction apb(Layout::Nodes, 2, Eigen::VectorXd(a.data() + b.data()));
    GridFunction amb(Layout::Nodes, 2, Eigen::VectorXd(a.data() - b.data()));
    const double para_lhs = inner_product(apb, apb, g) + inner_product(amb, amb, g);
    const double para_rhs = 2.0 * (inner_product(a, a, g) + inner_product(b, b, g));
    CHECK(para_lhs == doctest::Approx(para_rhs).epsilon(1e-10));
  }
}

TEST_CASE("shape errors") {
  TimeGrid g(1.0, 5);
  GridFunction a(Layout::Nodes, 2, g);
  GridFunction b(Layout::Intervals, 2, g);
  GridFunction c(Layout::Nodes, 3, g);
  CHECK_THROWS_AS(inner_product(a, b, g), ShapeError);
  CHECK_THROWS_AS(inner_product(a, c, g), ShapeError);
}

TEST_CASE("grid function CSV layout") {
  TimeGrid g(1.0, 4);
  GridFunction a(Layout::Intervals, 2, g);
  a.sample(0) << 1.0, -2.0;
  std::ostringstream os;
  write_csv(a, g, os);
  const std::string text = os.str();
  CHECK(text.substr(0, 28) == "tau,component_0,component_1\n");
  CHECK(text.find("0.25,1,-2") != std::string::npos);
  int rows = 0;
  for (char ch : text) rows += (ch == '\n');
  CHECK(rows == 5);
}
