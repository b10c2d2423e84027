#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "monoph/discrete_ops.hpp"
#include "monoph/timegrid.hpp"

namespace monoph {

// Which monotonicity certificate applies to an operator.  Pairwise is the
// standard <M(v1)-M(v2), v1-v2> >= 0; RelativeAtZero fixes v2 = 0 (used by
// the prox-coupled closed loop and energy-conserving plants).
enum class MonotonicityKind { Pairwise, RelativeAtZero };

// Single-valued selection of a monotone operator on a weighted flat space.
struct MonotoneMap {
  int dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
  std::string label;
  Eigen::VectorXd weights;  // inner-product weights of the flat space
  MonotonicityKind kind = MonotonicityKind::Pairwise;

  Eigen::VectorXd operator()(const Eigen::VectorXd& v) const { return eval(v); }
};

// Affine structure M(v) = L v + b with L monotone w.r.t. the weights.
struct AffineMap {
  Eigen::SparseMatrix<double, Eigen::RowMajor> L;
  Eigen::VectorXd b;
  Eigen::VectorXd weights;
};

// Box [lower, upper] in R^m with lower < upper componentwise.
struct BoxSet {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  BoxSet(Eigen::VectorXd lower_, Eigen::VectorXd upper_);

  int m() const { return static_cast<int>(lower.size()); }
  bool contains_zero_interior() const;
  bool symmetric(double tol = 0.0) const;  // lower == -upper
};

// Componentwise clamp; for stacked/grid inputs the box is applied pointwise
// in time (component count must be divisible by m).  Total, idempotent,
// firmly nonexpansive in every diagonal-weighted inner product.
Eigen::VectorXd project_box(const Eigen::VectorXd& v, const BoxSet& box);
GridFunction project_box(const GridFunction& v, const BoxSet& box);

// Moreau complement v - P_F(v): the proximal map of the support function of
// the box.
Eigen::VectorXd moreau_complement(const Eigen::VectorXd& v, const BoxSet& box);
GridFunction moreau_complement(const GridFunction& v, const BoxSet& box);

// Firmly-nonexpansive coupling of Prop.-2.6 type.  G1, G2 map the two state
// spaces into the common space H on which the box projection acts
// (G_i = F_i B_i^*).  Returns the map on the stacked state (x1, x2):
//   K(x1,x2) = (  c G1^* (P(G1 x1) - P(G2 x2)),
//                -c G2^* (P(G1 x1) - P(G2 x2)) )
// which is relative monotone w.r.t. 0 with
//   <K(v), v> >= c || P(G1 x1) - P(G2 x2) ||_H^2.
MonotoneMap build_prox_coupling(const LinearOp& G1, const LinearOp& G2, const BoxSet& box,
                                double c);
// Same with explicit output maps: G_i = F_i o adjoint(B_i).
MonotoneMap build_prox_coupling(const LinearOp& F1, const LinearOp& F2, const LinearOp& B1,
                                const LinearOp& B2, const BoxSet& box, double c);

// One implicit-Euler step of v' = -M(v) for affine M: solves
// (I + h L) w = v - h b.  Firmly nonexpansive in the weighted norm.
Eigen::VectorXd resolvent_step(const AffineMap& M, const Eigen::VectorXd& v, double h);

// ---- sampled property certificates -------------------------------------

struct CertificateReport {
  std::string label;
  int samples = 0;
  double worst_slack = 0.0;  // most negative margin observed (>= -tol passes)
  double tol = 0.0;
  bool pass = false;
};

// Monotonicity on pairs drawn uniformly from the ball of the given radius:
//   <M(v1) - M(v2), v1 - v2>_w >= -tol_rel * ||v1 - v2||_w^2.
// For RelativeAtZero maps, v2 = 0.
CertificateReport certify_monotone(const MonotoneMap& M, int n_pairs, double radius,
                                   std::uint64_t seed, double tol_rel = 1e-10);

// Firm nonexpansiveness of a map T:
//   <T(x) - T(y), x - y>_w >= ||T(x) - T(y)||_w^2 - tol.
CertificateReport certify_firmly_nonexpansive(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& T, int dim,
    const Eigen::VectorXd& weights, int n_pairs, double radius, std::uint64_t seed,
    double tol_rel = 1e-12, const std::string& label = "firmly nonexpansive");

// ---- trajectory-level passivity check ----------------------------------

struct PassivityReport {
  double worst_violation = 0.0;
  double tol = 0.0;
  int checked = 0;
  bool pass = false;
};

// Shifted passivity along a recorded trajectory of v' = -M(v) + B_in u(t):
// the centered difference of 0.5 ||v - vbar||_w^2 must not exceed
// <y - ybar, u - ubar>_in + tol, with y = B_in^* v.  (vbar, ubar) is a steady
// state pair: M(vbar) = B_in ubar.
PassivityReport check_shifted_passivity(const std::vector<double>& times,
                                        const std::vector<Eigen::VectorXd>& states,
                                        const std::vector<Eigen::VectorXd>& inputs,
                                        const Eigen::VectorXd& vbar, const Eigen::VectorXd& ubar,
                                        const LinearOp& B_in, const Eigen::VectorXd& state_weights,
                                        double tol);

// Uniform sample from the weighted ball of the given radius.
Eigen::VectorXd sample_ball(int dim, double radius, const Eigen::VectorXd& weights,
                            std::uint64_t& rng_state);

// Small deterministic xorshift generator used by every sampled certificate.
std::uint64_t rng_next(std::uint64_t& state);
double rng_uniform(std::uint64_t& state);  // in [0, 1)
double rng_normal(std::uint64_t& state);

}  // namespace monoph
