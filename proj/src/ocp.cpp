#include "monoph/ocp.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <cmath>
#include <memory>

#include "monoph/detail/assemble.hpp"

namespace monoph {

using detail::SpMat;

CostSpec CostSpec::quadratic_identity(double alpha) {
  if (!(alpha > 0.0)) throw ShapeError("CostSpec: alpha must be positive");
  CostSpec c;
  c.kind = CostKind::QuadraticIdentity;
  c.alpha = alpha;
  return c;
}

CostSpec CostSpec::quadratic_output(Eigen::MatrixXd C_out, double alpha) {
  if (!(alpha > 0.0)) throw ShapeError("CostSpec: alpha must be positive");
  CostSpec c;
  c.kind = CostKind::QuadraticOutput;
  c.C_out = std::move(C_out);
  c.alpha = alpha;
  return c;
}

CostSpec CostSpec::custom(std::function<double(const Eigen::VectorXd&)> value,
                          std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad,
                          double alpha) {
  if (!(alpha > 0.0)) throw ShapeError("CostSpec: alpha must be positive");
  if (!value || !grad) throw ShapeError("CostSpec: custom cost needs value and gradient");
  CostSpec c;
  c.kind = CostKind::Custom;
  c.custom_value = std::move(value);
  c.custom_grad = std::move(grad);
  c.alpha = alpha;
  return c;
}

double CostSpec::ell_x(const Eigen::VectorXd& x) const {
  switch (kind) {
    case CostKind::QuadraticIdentity:
      return 0.5 * x.squaredNorm();
    case CostKind::QuadraticOutput:
      return 0.5 * (C_out * x).squaredNorm();
    case CostKind::Custom:
      return custom_value(x);
  }
  return 0.0;
}

Eigen::VectorXd CostSpec::ell_x_gradient(const Eigen::VectorXd& x) const {
  switch (kind) {
    case CostKind::QuadraticIdentity:
      return x;
    case CostKind::QuadraticOutput:
      return C_out.transpose() * (C_out * x);
    case CostKind::Custom:
      return custom_grad(x);
  }
  return x;
}

Eigen::MatrixXd CostSpec::ell_x_hessian(int n) const {
  switch (kind) {
    case CostKind::QuadraticIdentity:
      return Eigen::MatrixXd::Identity(n, n);
    case CostKind::QuadraticOutput:
      return C_out.transpose() * C_out;
    case CostKind::Custom:
      throw UnsupportedError("CostSpec: no Hessian for custom cost");
  }
  return Eigen::MatrixXd::Identity(n, n);
}

OcpSpec::OcpSpec(SystemMatrices sys_, TimeGrid grid_, GridFunction f_, Eigen::VectorXd x0_,
                 CostSpec cost_, std::optional<BoxSet> box_)
    : sys(std::move(sys_)),
      grid(grid_),
      f(std::move(f_)),
      x0(std::move(x0_)),
      cost(std::move(cost_)),
      box(std::move(box_)) {
  if (f.layout() != Layout::Intervals || f.dim() != n() ||
      f.samples() != grid.samples(Layout::Intervals)) {
    throw ShapeError("OcpSpec: forcing must be an Intervals grid function of dim n");
  }
  if (x0.size() != n()) throw ShapeError("OcpSpec: x0 must have dimension n");
  if (cost.kind == CostKind::QuadraticOutput && cost.C_out.cols() != n()) {
    throw ShapeError("OcpSpec: C_out column count must equal n");
  }
  if (box) {
    if (box->m() != m()) throw ShapeError("OcpSpec: box dimension must equal m");
    if (!box->contains_zero_interior()) {
      throw ShapeError("OcpSpec: box must contain 0 in its interior");
    }
  }
  if (cost.kind == CostKind::Custom) {
    // Sampled midpoint-convexity check of the supplied stage cost.
    std::uint64_t s = 0x5eed;
    for (int i = 0; i < 50; ++i) {
      Eigen::VectorXd a(n()), b(n());
      for (int j = 0; j < n(); ++j) a[j] = 5.0 * (2.0 * rng_uniform(s) - 1.0);
      for (int j = 0; j < n(); ++j) b[j] = 5.0 * (2.0 * rng_uniform(s) - 1.0);
      const double lhs = cost.ell_x(0.5 * (a + b));
      const double rhs = 0.5 * (cost.ell_x(a) + cost.ell_x(b));
      const double scale = 1.0 + std::abs(cost.ell_x(a)) + std::abs(cost.ell_x(b));
      if (lhs > rhs + 1e-12 * scale) {
        throw ShapeError("OcpSpec: custom stage cost failed midpoint-convexity check");
      }
    }
  }
}

StateSpace open_unconstrained_space(const OcpSpec& spec) {
  return SpaceBuilder(spec.grid)
      .grid_block("x", Layout::Nodes, spec.n())
      .grid_block("u", Layout::Intervals, spec.m())
      .grid_block("lambda", Layout::Intervals, spec.n())
      .vec_block("lambda0", spec.n())
      .finish();
}

StateSpace open_constrained_space(const OcpSpec& spec) {
  return SpaceBuilder(spec.grid)
      .grid_block("x", Layout::Nodes, spec.n())
      .grid_block("lambda", Layout::Intervals, spec.n())
      .vec_block("lambda0", spec.n())
      .finish();
}

std::pair<GridFunction, GridFunction> grad_J(const OcpSpec& spec, const GridFunction& x,
                                             const GridFunction& u) {
  if (x.layout() != Layout::Nodes || x.dim() != spec.n() ||
      x.samples() != spec.grid.samples(Layout::Nodes)) {
    throw ShapeError("grad_J: x must live on Nodes with dim n");
  }
  if (u.layout() != Layout::Intervals || u.dim() != spec.m() ||
      u.samples() != spec.grid.samples(Layout::Intervals)) {
    throw ShapeError("grad_J: u must live on Intervals with dim m");
  }
  GridFunction gx(Layout::Nodes, spec.n(), spec.grid);
  for (int k = 1; k <= spec.grid.N; ++k) {
    gx.sample(k) = spec.cost.ell_x_gradient(x.sample(k));
  }
  GridFunction gu(Layout::Intervals, spec.m(), GridFunction(u).data() * spec.cost.alpha);
  return {std::move(gx), std::move(gu)};
}

double cost_value(const OcpSpec& spec, const GridFunction& x, const GridFunction& u) {
  double acc = 0.0;
  for (int k = 1; k <= spec.grid.N; ++k) {
    acc += spec.cost.ell_x(x.sample(k));
  }
  for (int j = 0; j < u.samples(); ++j) {
    acc += 0.5 * spec.cost.alpha * u.sample(j).squaredNorm();
  }
  return spec.grid.dt * acc;
}

namespace {

// Shared sparse pieces of the discrete optimality system.
struct KktPieces {
  LinearOp C;       // [x|u] -> [r|r0]
  LinearOp C_star;  // [lambda|lambda0] -> [x|u]
  SpMat Cx;         // C sliced to the x columns
  SpMat Cu;         // C sliced to the u columns
  SpMat Cst_x;      // C* sliced to the x rows
  SpMat Bt;         // lambda intervals -> (1/alpha) B^T lambda per interval
  int xs, us, ls, n, m, N;
};

KktPieces make_pieces(const OcpSpec& spec) {
  const int n = spec.n(), m = spec.m(), N = spec.grid.N;
  KktPieces p{build_C(spec.sys, spec.grid), LinearOp{}, {}, {}, {}, {}, (N + 1) * n, N * m,
              N * n, n, m, N};
  p.C_star = build_C_star(p.C);
  p.Cx = detail::slice(p.C.mat, 0, p.ls + n, 0, p.xs);
  p.Cu = detail::slice(p.C.mat, 0, p.ls + n, p.xs, p.xs + p.us);
  p.Cst_x = detail::slice(p.C_star.mat, 0, p.xs, 0, p.ls + n);
  p.Bt = detail::repeat_blockdiag(spec.sys.B.transpose(), N, 1.0 / spec.cost.alpha);
  return p;
}

// Nodewise stage-cost gradient in flat x coordinates (node 0 slot zero).
Eigen::VectorXd grad_x_flat(const OcpSpec& spec, const Eigen::VectorXd& x_flat) {
  const int n = spec.n();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x_flat.size());
  for (int k = 1; k <= spec.grid.N; ++k) {
    g.segment(k * n, n) = spec.cost.ell_x_gradient(x_flat.segment(k * n, n));
  }
  return g;
}

}  // namespace

MonotoneMap assemble_M_opt(const OcpSpec& spec) {
  auto pieces = std::make_shared<KktPieces>(make_pieces(spec));
  auto sp = std::make_shared<OcpSpec>(spec);

  MonotoneMap M;
  M.kind = MonotonicityKind::Pairwise;

  if (!spec.box) {
    const StateSpace space = open_unconstrained_space(spec);
    M.dim = space.dim();
    M.weights = space.weights();
    M.label = "M_opt (unconstrained)";
    const int xs = pieces->xs, us = pieces->us, ls = pieces->ls, n = pieces->n;
    M.eval = [pieces, sp, xs, us, ls, n](const Eigen::VectorXd& w) {
      Eigen::VectorXd out(w.size());
      const Eigen::VectorXd lam_full = w.segment(xs + us, ls + n);
      const Eigen::VectorXd adj = pieces->C_star.mat * lam_full;
      out.head(xs) = grad_x_flat(*sp, w.head(xs)) + adj.head(xs);
      out.segment(xs, us) = sp->cost.alpha * w.segment(xs, us) + adj.segment(xs, us);
      out.segment(xs + us, ls + n) = -(pieces->C.mat * w.head(xs + us));
      return out;
    };
    return M;
  }

  const StateSpace space = open_constrained_space(spec);
  auto box = std::make_shared<BoxSet>(*spec.box);
  M.dim = space.dim();
  M.weights = space.weights();
  M.label = "M_opt (prox-reduced)";
  const int xs = pieces->xs, ls = pieces->ls, n = pieces->n;
  M.eval = [pieces, sp, box, xs, ls, n](const Eigen::VectorXd& w) {
    Eigen::VectorXd out(w.size());
    const Eigen::VectorXd lam_full = w.segment(xs, ls + n);
    out.head(xs) = grad_x_flat(*sp, w.head(xs)) + pieces->Cst_x * lam_full;
    const Eigen::VectorXd u_p = project_box(
        Eigen::VectorXd(pieces->Bt * w.segment(xs, ls)), *box);
    out.segment(xs, ls + n) = -(pieces->Cx * w.head(xs) + pieces->Cu * u_p);
    return out;
  };
  return M;
}

namespace {

KktPoint solve_kkt_direct(const OcpSpec& spec, KktSolveInfo* info) {
  const KktPieces p = make_pieces(spec);
  const StateSpace space = open_unconstrained_space(spec);
  const int dim = space.dim();
  const int xs = p.xs, us = p.us, ls = p.ls, n = p.n;

  detail::TripletSink sink;
  sink.add(0, xs + us, p.C_star.mat);
  sink.add(xs + us, 0, p.C.mat, -1.0);
  const SpMat Hx = detail::repeat_blockdiag(spec.cost.ell_x_hessian(n), spec.grid.N);
  sink.add(n, n, Hx);  // nodes 1..N; node-0 slot carries no cost
  sink.add_identity(xs, xs, us, spec.cost.alpha);
  const SpMat L = sink.build(dim, dim);

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  rhs.segment(xs + us, ls) = -spec.f.data();
  rhs.tail(n) = -spec.x0;

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(Eigen::SparseMatrix<double>(L));
  if (lu.info() != Eigen::Success) {
    throw SolverError("solve_kkt: KKT factorization failed");
  }
  const Eigen::VectorXd w = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw SolverError("solve_kkt: KKT solve failed");

  KktPoint pt{GridFunction(Layout::Nodes, n, Eigen::VectorXd(w.head(xs))),
              GridFunction(Layout::Intervals, spec.m(), Eigen::VectorXd(w.segment(xs, us))),
              GridFunction(Layout::Nodes, n, spec.grid),
              Eigen::VectorXd(w.tail(n)),
              GridFunction(Layout::Intervals, spec.m(), spec.grid)};
  pt.lambda.sample(0) = pt.lambda0;
  for (int k = 1; k <= spec.grid.N; ++k) {
    pt.lambda.sample(k) = w.segment(xs + us + (k - 1) * n, n);
  }
  if (info) {
    info->iterations = 0;
    info->active_set_fraction = 0.0;
    info->residual = kkt_residual(spec, pt);
  }
  return pt;
}

struct ReducedProblem {
  const OcpSpec& spec;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;   // I - dt A
  Eigen::PartialPivLU<Eigen::MatrixXd> luT;  // (I - dt A)^T

  explicit ReducedProblem(const OcpSpec& s) : spec(s) {
    const Eigen::MatrixXd S =
        Eigen::MatrixXd::Identity(s.n(), s.n()) - s.grid.dt * s.sys.A;
    Eigen::FullPivLU<Eigen::MatrixXd> chk(S);
    if (!chk.isInvertible()) {
      throw SolverError("solve_kkt: I - dt*A is singular; refine the grid");
    }
    lu.compute(S);
    luT.compute(S.transpose());
  }

  // x_k = (I - dt A)^{-1} (x_{k-1} + dt B u_k + dt f_k), x_0 = x0.
  Eigen::VectorXd forward(const Eigen::VectorXd& u) const {
    const int n = spec.n(), m = spec.m(), N = spec.grid.N;
    const double dt = spec.grid.dt;
    Eigen::VectorXd x((N + 1) * n);
    x.head(n) = spec.x0;
    for (int k = 1; k <= N; ++k) {
      x.segment(k * n, n) =
          lu.solve(Eigen::VectorXd(x.segment((k - 1) * n, n) +
                                   dt * (spec.sys.B * u.segment((k - 1) * m, m)) +
                                   dt * spec.f.data().segment((k - 1) * n, n)));
    }
    return x;
  }

  // Adjoint recursion (I - dt A)^T lambda_k = lambda_{k+1} - dt grad l_x(x_k),
  // lambda_{N+1} = 0.
  Eigen::VectorXd adjoint_sweep(const Eigen::VectorXd& x) const {
    const int n = spec.n(), N = spec.grid.N;
    const double dt = spec.grid.dt;
    Eigen::VectorXd lam(N * n);
    Eigen::VectorXd next = Eigen::VectorXd::Zero(n);
    for (int k = N; k >= 1; --k) {
      next = luT.solve(
          Eigen::VectorXd(next - dt * spec.cost.ell_x_gradient(x.segment(k * n, n))));
      lam.segment((k - 1) * n, n) = next;
    }
    return lam;
  }

  double value(const Eigen::VectorXd& u, const Eigen::VectorXd& x) const {
    const int n = spec.n(), N = spec.grid.N;
    double acc = 0.0;
    for (int k = 1; k <= N; ++k) acc += spec.cost.ell_x(x.segment(k * n, n));
    acc += 0.5 * spec.cost.alpha * u.squaredNorm();
    return spec.grid.dt * acc;
  }

  // L^2-gradient of the reduced objective: g_k = alpha u_k - B^T lambda_k.
  Eigen::VectorXd gradient(const Eigen::VectorXd& u, const Eigen::VectorXd& lam) const {
    const int n = spec.n(), m = spec.m(), N = spec.grid.N;
    Eigen::VectorXd g(N * m);
    for (int k = 0; k < N; ++k) {
      g.segment(k * m, m) = spec.cost.alpha * u.segment(k * m, m) -
                            spec.sys.B.transpose() * lam.segment(k * n, n);
    }
    return g;
  }
};

KktPoint solve_kkt_projected_gradient(const OcpSpec& spec, KktSolveInfo* info,
                                      const GridFunction* u_start) {
  const ReducedProblem red(spec);
  const BoxSet& box = *spec.box;
  const int n = spec.n(), m = spec.m(), N = spec.grid.N;
  const double dt = spec.grid.dt;
  const double stat_tol = 1e-10;
  const long cap = 1000000;

  Eigen::VectorXd u = u_start ? project_box(u_start->data(), box)
                              : Eigen::VectorXd::Zero(N * m);
  Eigen::VectorXd x = red.forward(u);
  Eigen::VectorXd lam = red.adjoint_sweep(x);
  Eigen::VectorXd g = red.gradient(u, lam);
  double fval = red.value(u, x);

  auto u_norm = [dt](const Eigen::VectorXd& v) { return std::sqrt(dt * v.squaredNorm()); };

  double step = 1.0 / spec.cost.alpha;
  Eigen::VectorXd u_prev, g_prev;
  long it = 0;
  double resid = u_norm(u - project_box(Eigen::VectorXd(u - g), box));
  for (; it < cap && resid > 0.2 * stat_tol; ++it) {
    if (it > 0) {
      const Eigen::VectorXd du = u - u_prev;
      const Eigen::VectorXd dg = g - g_prev;
      const double num = du.dot(du);
      const double den = du.dot(dg);
      step = (den > 1e-300) ? num / den : 2.0 * step;
      step = std::min(std::max(step, 1e-12), 1e12);
    }
    Eigen::VectorXd u_t, x_t;
    double f_t = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      u_t = project_box(Eigen::VectorXd(u - step * g), box);
      x_t = red.forward(u_t);
      f_t = red.value(u_t, x_t);
      const Eigen::VectorXd d = u_t - u;
      const double quad = dt * (g.dot(d) + 0.5 / step * d.squaredNorm());
      if (f_t <= fval + quad + 1e-14 * (1.0 + std::abs(fval))) break;
      step *= 0.5;
    }
    u_prev = u;
    g_prev = g;
    u = u_t;
    x = x_t;
    lam = red.adjoint_sweep(x);
    g = red.gradient(u, lam);
    fval = f_t;
    resid = u_norm(u - project_box(Eigen::VectorXd(u - g), box));
  }
  if (resid > stat_tol) {
    throw SolverError("solve_kkt: projected gradient hit the iteration cap, residual " +
                      std::to_string(resid));
  }

  KktPoint pt{GridFunction(Layout::Nodes, n, std::move(x)),
              GridFunction(Layout::Intervals, m, u),
              GridFunction(Layout::Nodes, n, spec.grid),
              Eigen::VectorXd(lam.head(n)),
              GridFunction(Layout::Intervals, m, spec.grid)};
  pt.lambda.sample(0) = pt.lambda0;
  for (int k = 1; k <= N; ++k) pt.lambda.sample(k) = lam.segment((k - 1) * n, n);
  for (int k = 0; k < N; ++k) {
    pt.mu.sample(k) = spec.sys.B.transpose() * lam.segment(k * n, n) -
                      spec.cost.alpha * u.segment(k * m, m);
  }
  if (info) {
    info->iterations = it;
    int active = 0;
    for (int j = 0; j < N * m; ++j) {
      const int c = j % m;
      if (u[j] == box.lower[c] || u[j] == box.upper[c]) ++active;
    }
    info->active_set_fraction = static_cast<double>(active) / (N * m);
    info->residual = kkt_residual(spec, pt);
  }
  return pt;
}

}  // namespace

KktPoint solve_kkt(const OcpSpec& spec, KktSolveInfo* info, const GridFunction* u_start) {
  if (!spec.cost.quadratic()) {
    throw UnsupportedError("solve_kkt: oracle supports quadratic stage costs only");
  }
  return spec.box ? solve_kkt_projected_gradient(spec, info, u_start)
                  : solve_kkt_direct(spec, info);
}

double kkt_residual(const OcpSpec& spec, const KktPoint& p) {
  const int n = spec.n(), N = spec.grid.N;
  const double dt = spec.grid.dt;
  const KktPieces pieces = make_pieces(spec);

  // Interval-sampled multiplier (right endpoints) and flat primal blocks.
  Eigen::VectorXd lam(N * n);
  for (int k = 1; k <= N; ++k) lam.segment((k - 1) * n, n) = p.lambda.sample(k);
  Eigen::VectorXd lam_full(N * n + n);
  lam_full.head(N * n) = lam;
  lam_full.tail(n) = p.lambda0;
  Eigen::VectorXd z(pieces.xs + pieces.us);
  z.head(pieces.xs) = p.x_star.data();
  z.segment(pieces.xs, pieces.us) = p.u_star.data();

  // Adjoint equation grad J + C*(lambda, lambda0) + (0; mu).
  Eigen::VectorXd adj = pieces.C_star.mat * lam_full;
  adj.head(pieces.xs) += grad_x_flat(spec, p.x_star.data());
  adj.segment(pieces.xs, pieces.us) += spec.cost.alpha * p.u_star.data() + p.mu.data();

  // State equation (f, x0) - C(x, u).
  Eigen::VectorXd state = -(pieces.C.mat * z);
  state.head(N * n) += spec.f.data();
  state.tail(n) += spec.x0;

  // Prox-form complementarity: u - P_F(u + mu); without a box mu must vanish.
  Eigen::VectorXd comp;
  if (spec.box) {
    comp = p.u_star.data() - project_box(Eigen::VectorXd(p.u_star.data() + p.mu.data()),
                                         *spec.box);
  } else {
    comp = p.mu.data();
  }

  double sq = dt * adj.squaredNorm();
  sq += dt * state.head(N * n).squaredNorm() + state.tail(n).squaredNorm();
  sq += dt * comp.squaredNorm();
  return std::sqrt(sq);
}

Eigen::VectorXd kkt_to_state(const OcpSpec& spec, const KktPoint& p, bool constrained_layout) {
  const int n = spec.n(), N = spec.grid.N;
  Eigen::VectorXd lam(N * n);
  for (int k = 1; k <= N; ++k) lam.segment((k - 1) * n, n) = p.lambda.sample(k);

  if (constrained_layout) {
    const StateSpace space = open_constrained_space(spec);
    Eigen::VectorXd w(space.dim());
    space.view(w, "x") = p.x_star.data();
    space.view(w, "lambda") = lam;
    space.view(w, "lambda0") = p.lambda0;
    return w;
  }
  const StateSpace space = open_unconstrained_space(spec);
  Eigen::VectorXd w(space.dim());
  space.view(w, "x") = p.x_star.data();
  space.view(w, "u") = p.u_star.data();
  space.view(w, "lambda") = lam;
  space.view(w, "lambda0") = p.lambda0;
  return w;
}

KktPoint state_to_kkt(const OcpSpec& spec, const Eigen::VectorXd& w, bool constrained_layout) {
  const int n = spec.n(), m = spec.m(), N = spec.grid.N;
  const StateSpace space =
      constrained_layout ? open_constrained_space(spec) : open_unconstrained_space(spec);
  if (w.size() != space.dim()) throw ShapeError("state_to_kkt: state size mismatch");

  KktPoint p{GridFunction(Layout::Nodes, n, Eigen::VectorXd(space.view(w, "x"))),
             GridFunction(Layout::Intervals, m, spec.grid),
             GridFunction(Layout::Nodes, n, spec.grid),
             Eigen::VectorXd(space.view(w, "lambda0")),
             GridFunction(Layout::Intervals, m, spec.grid)};
  const Eigen::VectorXd lam = space.view(w, "lambda");
  p.lambda.sample(0) = p.lambda0;
  for (int k = 1; k <= N; ++k) p.lambda.sample(k) = lam.segment((k - 1) * n, n);

  if (constrained_layout) {
    if (!spec.box) throw UsageError("state_to_kkt: constrained layout needs a box");
    for (int k = 0; k < N; ++k) {
      const Eigen::VectorXd c =
          spec.sys.B.transpose() * lam.segment(k * n, n) / spec.cost.alpha;
      p.u_star.sample(k) = project_box(c, *spec.box);
      p.mu.sample(k) =
          spec.sys.B.transpose() * lam.segment(k * n, n) - spec.cost.alpha * p.u_star.sample(k);
    }
  } else {
    p.u_star = GridFunction(Layout::Intervals, m, Eigen::VectorXd(space.view(w, "u")));
  }
  return p;
}

}  // namespace monoph
