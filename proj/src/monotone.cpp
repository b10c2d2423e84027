#include "monoph/monotone.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <memory>

namespace monoph {

BoxSet::BoxSet(Eigen::VectorXd lower_, Eigen::VectorXd upper_)
    : lower(std::move(lower_)), upper(std::move(upper_)) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw ShapeError("BoxSet: bound vectors must be nonempty and equal-sized");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) {
      throw ShapeError("BoxSet: lower bound must be strictly below upper bound");
    }
  }
}

bool BoxSet::contains_zero_interior() const {
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < 0.0 && 0.0 < upper[i])) return false;
  }
  return true;
}

bool BoxSet::symmetric(double tol) const {
  return (lower + upper).cwiseAbs().maxCoeff() <= tol;
}

Eigen::VectorXd project_box(const Eigen::VectorXd& v, const BoxSet& box) {
  const int m = box.m();
  if (v.size() % m != 0) throw ShapeError("project_box: component count not divisible by m");
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const int c = static_cast<int>(i % m);
    out[i] = std::min(box.upper[c], std::max(box.lower[c], v[i]));
  }
  return out;
}

GridFunction project_box(const GridFunction& v, const BoxSet& box) {
  if (v.dim() % box.m() != 0) throw ShapeError("project_box: grid dim not divisible by m");
  return GridFunction(v.layout(), v.dim(), project_box(v.data(), box));
}

Eigen::VectorXd moreau_complement(const Eigen::VectorXd& v, const BoxSet& box) {
  return v - project_box(v, box);
}

GridFunction moreau_complement(const GridFunction& v, const BoxSet& box) {
  return GridFunction(v.layout(), v.dim(), v.data() - project_box(v.data(), box));
}

MonotoneMap build_prox_coupling(const LinearOp& G1, const LinearOp& G2, const BoxSet& box,
                                double c) {
  if (!(c > 0.0)) throw ShapeError("build_prox_coupling: c must be positive");
  if (G1.rows() != G2.rows()) {
    throw ShapeError("build_prox_coupling: G1, G2 must map into a common space");
  }
  if (G1.rows() % box.m() != 0) {
    throw ShapeError("build_prox_coupling: H dimension not divisible by box dimension");
  }
  const int n1 = G1.cols();
  const int n2 = G2.cols();
  auto g1 = std::make_shared<LinearOp>(G1);
  auto g2 = std::make_shared<LinearOp>(G2);
  auto g1t = std::make_shared<LinearOp>(adjoint(G1));
  auto g2t = std::make_shared<LinearOp>(adjoint(G2));
  auto bx = std::make_shared<BoxSet>(box);

  MonotoneMap M;
  M.dim = n1 + n2;
  M.label = "prox coupling";
  M.kind = MonotonicityKind::RelativeAtZero;
  M.weights = Eigen::VectorXd(n1 + n2);
  M.weights.head(n1) = G1.in_weights;
  M.weights.tail(n2) = G2.in_weights;
  M.eval = [n1, n2, c, g1, g2, g1t, g2t, bx](const Eigen::VectorXd& v) {
    const Eigen::VectorXd x1 = v.head(n1);
    const Eigen::VectorXd x2 = v.tail(n2);
    const Eigen::VectorXd h =
        project_box(apply(*g1, x1), *bx) - project_box(apply(*g2, x2), *bx);
    Eigen::VectorXd out(n1 + n2);
    out.head(n1) = c * apply(*g1t, h);
    out.tail(n2) = -c * apply(*g2t, h);
    return out;
  };
  return M;
}

MonotoneMap build_prox_coupling(const LinearOp& F1, const LinearOp& F2, const LinearOp& B1,
                                const LinearOp& B2, const BoxSet& box, double c) {
  return build_prox_coupling(compose(F1, adjoint(B1)), compose(F2, adjoint(B2)), box, c);
}

Eigen::VectorXd resolvent_step(const AffineMap& M, const Eigen::VectorXd& v, double h) {
  if (!(h > 0.0)) throw ShapeError("resolvent_step: step size must be positive");
  if (v.size() != M.L.rows()) throw ShapeError("resolvent_step: state size mismatch");
  Eigen::SparseMatrix<double> sys = Eigen::SparseMatrix<double>(M.L) * h;
  for (int i = 0; i < sys.rows(); ++i) sys.coeffRef(i, i) += 1.0;
  sys.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(sys);
  if (lu.info() != Eigen::Success) {
    throw SolverError("resolvent_step: factorization of (I + h L) failed");
  }
  Eigen::VectorXd w = lu.solve(v - h * M.b);
  if (lu.info() != Eigen::Success) {
    throw SolverError("resolvent_step: solve failed");
  }
  return w;
}

// ---- deterministic sampling ---------------------------------------------

std::uint64_t rng_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double rng_uniform(std::uint64_t& state) {
  return static_cast<double>(rng_next(state) >> 11) * 0x1.0p-53;
}

double rng_normal(std::uint64_t& state) {
  const double u1 = std::max(rng_uniform(state), 0x1.0p-53);
  const double u2 = rng_uniform(state);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

Eigen::VectorXd sample_ball(int dim, double radius, const Eigen::VectorXd& weights,
                            std::uint64_t& rng_state) {
  Eigen::VectorXd d(dim);
  for (int i = 0; i < dim; ++i) d[i] = rng_normal(rng_state);
  const double nrm = std::sqrt(weighted_dot(d, d, weights));
  if (nrm == 0.0) return Eigen::VectorXd::Zero(dim);
  const double r = radius * std::pow(rng_uniform(rng_state), 1.0 / dim);
  return (r / nrm) * d;
}

CertificateReport certify_monotone(const MonotoneMap& M, int n_pairs, double radius,
                                   std::uint64_t seed, double tol_rel) {
  CertificateReport rep;
  rep.label = M.label.empty() ? "monotone map" : M.label;
  rep.samples = n_pairs;
  rep.tol = tol_rel;
  std::uint64_t s = seed;
  double worst = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(M.dim);
  for (int i = 0; i < n_pairs; ++i) {
    const Eigen::VectorXd v1 = sample_ball(M.dim, radius, M.weights, s);
    const Eigen::VectorXd v2 = (M.kind == MonotonicityKind::RelativeAtZero)
                                   ? zero
                                   : sample_ball(M.dim, radius, M.weights, s);
    const Eigen::VectorXd dv = v1 - v2;
    const double scale = weighted_dot(dv, dv, M.weights);
    if (scale == 0.0) continue;
    const Eigen::VectorXd dM = (M.kind == MonotonicityKind::RelativeAtZero)
                                   ? M.eval(v1)
                                   : Eigen::VectorXd(M.eval(v1) - M.eval(v2));
    worst = std::min(worst, weighted_dot(dM, dv, M.weights) / scale);
  }
  rep.worst_slack = std::isfinite(worst) ? worst : 0.0;
  rep.pass = rep.worst_slack >= -tol_rel;
  return rep;
}

CertificateReport certify_firmly_nonexpansive(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& T, int dim,
    const Eigen::VectorXd& weights, int n_pairs, double radius, std::uint64_t seed, double tol_rel,
    const std::string& label) {
  CertificateReport rep;
  rep.label = label;
  rep.samples = n_pairs;
  rep.tol = tol_rel;
  std::uint64_t s = seed;
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_pairs; ++i) {
    const Eigen::VectorXd x = sample_ball(dim, radius, weights, s);
    const Eigen::VectorXd y = sample_ball(dim, radius, weights, s);
    const Eigen::VectorXd dxy = x - y;
    const double scale = weighted_dot(dxy, dxy, weights);
    if (scale == 0.0) continue;
    const Eigen::VectorXd dT = T(x) - T(y);
    const double slack =
        (weighted_dot(dT, dxy, weights) - weighted_dot(dT, dT, weights)) / scale;
    worst = std::min(worst, slack);
  }
  rep.worst_slack = std::isfinite(worst) ? worst : 0.0;
  rep.pass = rep.worst_slack >= -tol_rel;
  return rep;
}

PassivityReport check_shifted_passivity(const std::vector<double>& times,
                                        const std::vector<Eigen::VectorXd>& states,
                                        const std::vector<Eigen::VectorXd>& inputs,
                                        const Eigen::VectorXd& vbar, const Eigen::VectorXd& ubar,
                                        const LinearOp& B_in, const Eigen::VectorXd& state_weights,
                                        double tol) {
  if (states.size() != times.size()) {
    throw UsageError("check_shifted_passivity: trajectory length mismatch");
  }
  if (inputs.size() != times.size()) {
    throw UsageError("check_shifted_passivity: trajectory has no recorded inputs");
  }
  const LinearOp B_adj = adjoint(B_in);
  const Eigen::VectorXd ybar = apply(B_adj, vbar);

  PassivityReport rep;
  rep.tol = tol;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k + 1 < times.size(); ++k) {
    const double h2 = times[k + 1] - times[k - 1];
    if (!(h2 > 0.0)) continue;
    auto V = [&](std::size_t j) {
      const Eigen::VectorXd d = states[j] - vbar;
      return 0.5 * weighted_dot(d, d, state_weights);
    };
    const double dV = (V(k + 1) - V(k - 1)) / h2;
    const Eigen::VectorXd y = apply(B_adj, states[k]);
    const double supply = weighted_dot(y - ybar, inputs[k] - ubar, B_in.in_weights);
    worst = std::max(worst, dV - supply);
    ++rep.checked;
  }
  rep.worst_violation = std::isfinite(worst) ? worst : 0.0;
  rep.pass = rep.worst_violation <= tol;
  return rep;
}

}  // namespace monoph
