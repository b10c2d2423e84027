#include "monoph/flows.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <memory>

#include "monoph/detail/assemble.hpp"

namespace monoph {

using detail::SpMat;
using detail::TripletSink;

PlantSpec PlantSpec::conserving2d() {
  PlantSpec p;
  p.n_p = 2;
  p.kind = PlantKind::Conserving2d;
  p.mono = MonotonicityKind::RelativeAtZero;
  p.B_p = Eigen::MatrixXd(2, 1);
  p.B_p << 0.0, 1.0;
  p.M_p = [](const Eigen::VectorXd& z) {
    const double c = 1.0 + z.squaredNorm();
    Eigen::VectorXd out(2);
    out << c * z[1], -c * z[0];
    return out;
  };
  return p;
}

PlantSpec PlantSpec::linear(const Eigen::MatrixXd& M, const Eigen::MatrixXd& B_p) {
  if (M.rows() != M.cols()) throw ShapeError("PlantSpec: M must be square");
  if (B_p.rows() != M.rows()) throw ShapeError("PlantSpec: B_p row count must equal n_p");
  const Eigen::MatrixXd sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const double scale = 1.0 + M.cwiseAbs().maxCoeff();
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw ShapeError("PlantSpec: symmetric part of M must be positive semidefinite");
  }
  PlantSpec p;
  p.n_p = static_cast<int>(M.rows());
  p.kind = PlantKind::Linear;
  p.mono = MonotonicityKind::Pairwise;
  p.B_p = B_p;
  Eigen::MatrixXd Mc = M;
  p.M_p = [Mc](const Eigen::VectorXd& z) { return Eigen::VectorXd(Mc * z); };
  return p;
}

PlantSpec PlantSpec::custom(int n_p, std::function<Eigen::VectorXd(const Eigen::VectorXd&)> M_p,
                            const Eigen::MatrixXd& B_p, MonotonicityKind mono) {
  if (B_p.rows() != n_p) throw ShapeError("PlantSpec: B_p row count must equal n_p");
  if (!M_p) throw ShapeError("PlantSpec: missing evaluation");
  if (M_p(Eigen::VectorXd::Zero(n_p)).norm() != 0.0) {
    throw ShapeError("PlantSpec: M_p(0) must vanish");
  }
  PlantSpec p;
  p.n_p = n_p;
  p.kind = PlantKind::Custom;
  p.mono = mono;
  p.B_p = B_p;
  p.M_p = std::move(M_p);
  return p;
}

Eigen::VectorXd plant_rhs(const PlantSpec& plant, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& u_p) {
  if (z.size() != plant.n_p || u_p.size() != plant.m_p()) {
    throw ShapeError("plant_rhs: dimension mismatch");
  }
  return -plant.M_p(z) + plant.B_p * u_p;
}

std::string to_string(FlowVariant v) {
  switch (v) {
    case FlowVariant::OpenU:
      return "open_u";
    case FlowVariant::OpenC:
      return "open_c";
    case FlowVariant::ClosedU:
      return "closed_u";
    case FlowVariant::ClosedC:
      return "closed_c";
  }
  return "?";
}

Eigen::VectorXd Flow::rhs(const Eigen::VectorXd& v, const Eigen::VectorXd& input) const {
  if (!B_in) throw UsageError("Flow: this flow has no external input port");
  if (input.size() != B_in->cols()) throw ShapeError("Flow: input size mismatch");
  return -M.eval(v) + apply(*B_in, Eigen::VectorXd(input - input_default));
}

Eigen::VectorXd Flow::feedback_u_p(const Eigen::VectorXd& v) const {
  if (!closed_loop() || !u_p_of) {
    throw UsageError("feedback_u_p: only defined for closed-loop flows");
  }
  return u_p_of(v);
}

double Flow::plant_norm(const Eigen::VectorXd& v) const {
  if (!closed_loop()) return 0.0;
  return v.head(plant_dim).norm();
}

double Flow::feasibility_margin(const Eigen::VectorXd& v) const {
  if (!box || !control_of) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd u = control_of(v);
  double margin = std::numeric_limits<double>::infinity();
  const int m = box->m();
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const int c = static_cast<int>(i % m);
    margin = std::min(margin, std::min(box->upper[c] - u[i], u[i] - box->lower[c]));
  }
  return margin;
}

namespace {

struct FlowPieces {
  LinearOp C;
  LinearOp C_star;
  SpMat Cx, Cu, Cst_x, Bt;
  int xs, us, ls, n, m, N;
};

FlowPieces make_flow_pieces(const OcpSpec& spec) {
  const int n = spec.n(), m = spec.m(), N = spec.grid.N;
  FlowPieces p{build_C(spec.sys, spec.grid), LinearOp{}, {}, {}, {}, {},
               (N + 1) * n, N * m, N * n, n, m, N};
  p.C_star = build_C_star(p.C);
  p.Cx = detail::slice(p.C.mat, 0, p.ls + n, 0, p.xs);
  p.Cu = detail::slice(p.C.mat, 0, p.ls + n, p.xs, p.xs + p.us);
  p.Cst_x = detail::slice(p.C_star.mat, 0, p.xs, 0, p.ls + n);
  p.Bt = detail::repeat_blockdiag(spec.sys.B.transpose(), N, 1.0 / spec.cost.alpha);
  return p;
}

Eigen::VectorXd grad_x_flat(const OcpSpec& spec, const Eigen::VectorXd& x_flat) {
  const int n = spec.n();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x_flat.size());
  for (int k = 1; k <= spec.grid.N; ++k) {
    g.segment(k * n, n) = spec.cost.ell_x_gradient(x_flat.segment(k * n, n));
  }
  return g;
}

// Input port of the optimizer dynamics: (f, x0) enters the multiplier rows
// with a minus sign.
LinearOp make_input_port(const StateSpace& space, int ls, int n) {
  TripletSink sink;
  sink.add_identity(space.block("lambda").offset, 0, ls, -1.0);
  sink.add_identity(space.block("lambda0").offset, ls, n, -1.0);
  Eigen::VectorXd in_w(ls + n);
  in_w.head(ls).setConstant(space.grid().dt);
  in_w.tail(n).setOnes();
  return make_op(sink.build(space.dim(), ls + n), in_w, space.weights());
}

Eigen::VectorXd input_flat(const OcpSpec& spec) {
  Eigen::VectorXd in(spec.grid.N * spec.n() + spec.n());
  in.head(spec.grid.N * spec.n()) = spec.f.data();
  in.tail(spec.n()) = spec.x0;
  return in;
}

}  // namespace

Flow build_open_unconstrained(const OcpSpec& spec, bool with_oracle_steady) {
  auto pieces = std::make_shared<FlowPieces>(make_flow_pieces(spec));
  auto sp = std::make_shared<OcpSpec>(spec);
  const StateSpace space = open_unconstrained_space(spec);
  const int xs = pieces->xs, us = pieces->us, ls = pieces->ls, n = pieces->n;

  TripletSink ksink;
  ksink.add(0, xs + us, pieces->C_star.mat);
  ksink.add(xs + us, 0, pieces->C.mat, -1.0);

  auto c = std::make_shared<Eigen::VectorXd>(Eigen::VectorXd::Zero(space.dim()));
  c->segment(xs + us, ls) = spec.f.data();
  c->tail(n) = spec.x0;

  Flow flow(space);
  flow.variant = FlowVariant::OpenU;
  flow.label = "open_u";
  flow.K = ksink.build(space.dim(), space.dim());
  flow.box = spec.box;
  flow.input_default = input_flat(spec);
  flow.B_in = make_input_port(space, ls, n);

  flow.M.dim = space.dim();
  flow.M.weights = space.weights();
  flow.M.kind = MonotonicityKind::Pairwise;
  flow.M.label = "flow open_u";
  if (spec.cost.quadratic()) {
    TripletSink lsink;
    lsink.trips = ksink.trips;
    lsink.add(n, n, detail::repeat_blockdiag(spec.cost.ell_x_hessian(n), spec.grid.N));
    lsink.add_identity(xs, xs, us, spec.cost.alpha);
    auto L = std::make_shared<SpMat>(lsink.build(space.dim(), space.dim()));
    flow.M.eval = [L, c](const Eigen::VectorXd& w) { return Eigen::VectorXd(*L * w + *c); };
    flow.affine = AffineMap{*L, *c, space.weights()};
  } else {
    auto Ksh = std::make_shared<SpMat>(flow.K);
    flow.M.eval = [Ksh, c, sp, xs, us](const Eigen::VectorXd& w) {
      Eigen::VectorXd out = *Ksh * w + *c;
      out.head(xs) += grad_x_flat(*sp, w.head(xs));
      out.segment(xs, us) += sp->cost.alpha * w.segment(xs, us);
      return out;
    };
  }

  if (spec.box) {
    flow.control_of = [xs, us](const Eigen::VectorXd& w) {
      return Eigen::VectorXd(w.segment(xs, us));
    };
  }

  flow.steady = Eigen::VectorXd::Zero(space.dim());
  if (with_oracle_steady && spec.cost.quadratic()) {
    // The unconstrained flow ignores any box, so its equilibrium is the
    // boxless optimum.
    const OcpSpec unboxed(spec.sys, spec.grid, spec.f, spec.x0, spec.cost, std::nullopt);
    flow.steady = kkt_to_state(unboxed, solve_kkt(unboxed), false);
  }
  return flow;
}

Flow build_open_constrained(const OcpSpec& spec, bool with_oracle_steady) {
  if (!spec.box) throw UsageError("build_open_constrained: the problem has no box");
  auto pieces = std::make_shared<FlowPieces>(make_flow_pieces(spec));
  auto sp = std::make_shared<OcpSpec>(spec);
  auto box = std::make_shared<BoxSet>(*spec.box);
  const StateSpace space = open_constrained_space(spec);
  const int xs = pieces->xs, ls = pieces->ls, n = pieces->n;

  TripletSink ksink;
  ksink.add(0, xs, pieces->Cst_x);
  ksink.add(xs, 0, pieces->Cx, -1.0);

  auto c = std::make_shared<Eigen::VectorXd>(Eigen::VectorXd::Zero(space.dim()));
  c->segment(xs, ls) = spec.f.data();
  c->tail(n) = spec.x0;

  Flow flow(space);
  flow.variant = FlowVariant::OpenC;
  flow.label = "open_c";
  flow.K = ksink.build(space.dim(), space.dim());
  flow.box = spec.box;
  flow.input_default = input_flat(spec);
  flow.B_in = make_input_port(space, ls, n);

  auto Ksh = std::make_shared<SpMat>(flow.K);
  flow.M.dim = space.dim();
  flow.M.weights = space.weights();
  flow.M.kind = MonotonicityKind::Pairwise;
  flow.M.label = "flow open_c";
  flow.M.eval = [Ksh, c, sp, pieces, box, xs, ls](const Eigen::VectorXd& w) {
    Eigen::VectorXd out = *Ksh * w + *c;
    out.head(xs) += grad_x_flat(*sp, w.head(xs));
    const Eigen::VectorXd u_p =
        project_box(Eigen::VectorXd(pieces->Bt * w.segment(xs, ls)), *box);
    out.segment(xs, ls + pieces->n) -= pieces->Cu * u_p;
    return out;
  };
  flow.control_of = [pieces, box, xs, ls](const Eigen::VectorXd& w) {
    return project_box(Eigen::VectorXd(pieces->Bt * w.segment(xs, ls)), *box);
  };

  flow.steady = Eigen::VectorXd::Zero(space.dim());
  if (with_oracle_steady && spec.cost.quadratic()) {
    flow.steady = kkt_to_state(spec, solve_kkt(spec), true);
  }
  return flow;
}

namespace {

// Skew interconnection block of the unconstrained closed loop, from the
// generic power-preserving coupling: system 1 is the plant with input map
// B_p, system 2 the optimizer with the x0-slot input map, interconnection
// gain E = -(1/alpha) B^T.
SpMat closed_u_coupling(const OcpSpec& spec, const PlantSpec& plant,
                        const StateSpace& opt_space) {
  const int n = spec.n();
  const LinearOp B1 = make_op_dense(plant.B_p, Eigen::VectorXd::Ones(plant.m_p()),
                                    Eigen::VectorXd::Ones(plant.n_p));
  TripletSink b2;
  b2.add_identity(opt_space.block("lambda0").offset, 0, n, -1.0);
  const LinearOp B2 =
      make_op(b2.build(opt_space.dim(), n), Eigen::VectorXd::Ones(n), opt_space.weights());
  const LinearOp E =
      make_op_dense(-spec.sys.B.transpose() / spec.cost.alpha, Eigen::VectorXd::Ones(n),
                    Eigen::VectorXd::Ones(plant.m_p()));
  return build_skew_coupling(B1, B2, E).mat;
}

}  // namespace

Flow build_closed_unconstrained(const OcpSpec& spec, const PlantSpec& plant) {
  if (plant.m_p() != spec.m()) {
    throw ShapeError("build_closed_unconstrained: plant and optimizer must share the input size");
  }
  auto pieces = std::make_shared<FlowPieces>(make_flow_pieces(spec));
  auto sp = std::make_shared<OcpSpec>(spec);
  auto pl = std::make_shared<PlantSpec>(plant);
  const int xs = pieces->xs, us = pieces->us, n = pieces->n;
  const int np = plant.n_p;

  const StateSpace opt_space = open_unconstrained_space(spec);
  const StateSpace space = SpaceBuilder(spec.grid)
                               .vec_block("x_p", np)
                               .grid_block("x", Layout::Nodes, n)
                               .grid_block("u", Layout::Intervals, spec.m())
                               .grid_block("lambda", Layout::Intervals, n)
                               .vec_block("lambda0", n)
                               .finish();

  TripletSink ksink;
  ksink.add(np + 0, np + xs + us, pieces->C_star.mat);
  ksink.add(np + xs + us, np + 0, pieces->C.mat, -1.0);
  ksink.add(0, 0, closed_u_coupling(spec, plant, opt_space));

  Flow flow(space);
  flow.variant = FlowVariant::ClosedU;
  flow.label = "closed_u";
  flow.K = ksink.build(space.dim(), space.dim());
  flow.box = spec.box;
  flow.plant_dim = np;
  flow.steady = Eigen::VectorXd::Zero(space.dim());

  flow.M.dim = space.dim();
  flow.M.weights = space.weights();
  flow.M.kind = (plant.mono == MonotonicityKind::Pairwise) ? MonotonicityKind::Pairwise
                                                           : MonotonicityKind::RelativeAtZero;
  flow.M.label = "flow closed_u";
  auto Ksh = std::make_shared<SpMat>(flow.K);
  flow.M.eval = [Ksh, sp, pl, np, xs, us](const Eigen::VectorXd& v) {
    Eigen::VectorXd out = *Ksh * v;
    out.head(np) += pl->M_p(v.head(np));
    out.segment(np, xs) += grad_x_flat(*sp, v.segment(np, xs));
    out.segment(np + xs, us) += sp->cost.alpha * v.segment(np + xs, us);
    return out;
  };
  if (spec.cost.quadratic() && plant.kind == PlantKind::Linear) {
    TripletSink lsink;
    lsink.trips = ksink.trips;
    Eigen::MatrixXd Mlin(np, np);
    for (int i = 0; i < np; ++i) Mlin.col(i) = plant.M_p(Eigen::VectorXd::Unit(np, i));
    lsink.add_dense(0, 0, Mlin);
    lsink.add(np + n, np + n, detail::repeat_blockdiag(spec.cost.ell_x_hessian(n), spec.grid.N));
    lsink.add_identity(np + xs, np + xs, us, spec.cost.alpha);
    flow.affine = AffineMap{lsink.build(space.dim(), space.dim()),
                            Eigen::VectorXd::Zero(space.dim()), space.weights()};
  }

  const Eigen::MatrixXd Bt_over_alpha = spec.sys.B.transpose() / spec.cost.alpha;
  const int l0_off = space.block("lambda0").offset;
  flow.u_p_of = [Bt_over_alpha, l0_off, n](const Eigen::VectorXd& v) {
    return Eigen::VectorXd(Bt_over_alpha * v.segment(l0_off, n));
  };
  flow.control_of = flow.u_p_of;
  return flow;
}

Flow build_closed_constrained(const OcpSpec& spec, const PlantSpec& plant) {
  if (!spec.box) throw UsageError("build_closed_constrained: the problem has no box");
  if (!spec.box->symmetric(1e-14)) {
    throw UsageError("build_closed_constrained: the box must satisfy lower = -upper");
  }
  if (plant.m_p() != spec.m()) {
    throw ShapeError("build_closed_constrained: plant and optimizer must share the input size");
  }
  auto pieces = std::make_shared<FlowPieces>(make_flow_pieces(spec));
  auto sp = std::make_shared<OcpSpec>(spec);
  auto pl = std::make_shared<PlantSpec>(plant);
  auto box = std::make_shared<BoxSet>(*spec.box);
  const int xs = pieces->xs, ls = pieces->ls, n = pieces->n;
  const int np = plant.n_p;

  const StateSpace space = SpaceBuilder(spec.grid)
                               .vec_block("x_p", np)
                               .grid_block("x", Layout::Nodes, n)
                               .grid_block("lambda", Layout::Intervals, n)
                               .vec_block("lambda0", n)
                               .finish();

  TripletSink ksink;
  ksink.add(np + 0, np + xs, pieces->Cst_x);
  ksink.add(np + xs, np + 0, pieces->Cx, -1.0);

  Flow flow(space);
  flow.variant = FlowVariant::ClosedC;
  flow.label = "closed_c";
  flow.K = ksink.build(space.dim(), space.dim());
  flow.box = spec.box;
  flow.plant_dim = np;
  flow.steady = Eigen::VectorXd::Zero(space.dim());

  const Eigen::MatrixXd Bt_over_alpha = spec.sys.B.transpose() / spec.cost.alpha;
  const Eigen::MatrixXd Bpt = plant.B_p.transpose();
  const double alpha = spec.cost.alpha;

  flow.M.dim = space.dim();
  flow.M.weights = space.weights();
  flow.M.kind = MonotonicityKind::RelativeAtZero;
  flow.M.label = "flow closed_c";
  auto Ksh = std::make_shared<SpMat>(flow.K);
  flow.M.eval = [Ksh, sp, pl, box, pieces, Bt_over_alpha, Bpt, alpha, np, xs,
                 ls](const Eigen::VectorXd& v) {
    const int n_ = pieces->n;
    Eigen::VectorXd out = *Ksh * v;
    const Eigen::VectorXd x_p = v.head(np);
    const Eigen::VectorXd lam0 = v.tail(n_);
    const Eigen::VectorXd e1 = project_box(Eigen::VectorXd(Bt_over_alpha * lam0), *box);
    const Eigen::VectorXd e2 = project_box(Eigen::VectorXd(Bpt * x_p), *box);
    out.head(np) += pl->M_p(x_p) - 0.5 * (pl->B_p * (e1 - e2));
    out.segment(np, xs) += grad_x_flat(*sp, v.segment(np, xs));
    const Eigen::VectorXd u_p =
        project_box(Eigen::VectorXd(pieces->Bt * v.segment(np + xs, ls)), *box);
    out.segment(np + xs, ls + n_) -= pieces->Cu * u_p;
    out.tail(n_) += (0.5 / alpha) * (sp->sys.B * (e1 - e2));
    return out;
  };

  flow.u_p_of = [Bt_over_alpha, Bpt, box, np, n](const Eigen::VectorXd& v) {
    const Eigen::VectorXd e1 = project_box(Eigen::VectorXd(Bt_over_alpha * v.tail(n)), *box);
    const Eigen::VectorXd e2 = project_box(Eigen::VectorXd(Bpt * v.head(np)), *box);
    return Eigen::VectorXd(0.5 * (e1 - e2));
  };
  flow.control_of = flow.u_p_of;
  return flow;
}

Flow build_flow(FlowVariant variant, const OcpSpec& spec, const PlantSpec* plant,
                bool with_oracle_steady) {
  switch (variant) {
    case FlowVariant::OpenU:
      return build_open_unconstrained(spec, with_oracle_steady);
    case FlowVariant::OpenC:
      return build_open_constrained(spec, with_oracle_steady);
    case FlowVariant::ClosedU:
      if (!plant) throw UsageError("build_flow: closed loop needs a plant");
      return build_closed_unconstrained(spec, *plant);
    case FlowVariant::ClosedC:
      if (!plant) throw UsageError("build_flow: closed loop needs a plant");
      return build_closed_constrained(spec, *plant);
  }
  throw UsageError("build_flow: unknown variant");
}

}  // namespace monoph
