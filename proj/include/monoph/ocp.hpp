#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <utility>

#include "monoph/discrete_ops.hpp"
#include "monoph/monotone.hpp"
#include "monoph/state_space.hpp"
#include "monoph/timegrid.hpp"

namespace monoph {

enum class CostKind { QuadraticIdentity, QuadraticOutput, Custom };

// Stage cost l_x(x) + (alpha/2)|u|^2.  l_x is one of: 0.5|x|^2,
// 0.5|C_out x|^2, or a user-supplied smooth convex function.
struct CostSpec {
  CostKind kind = CostKind::QuadraticIdentity;
  Eigen::MatrixXd C_out;  // QuadraticOutput only
  double alpha = 1.0;
  std::function<double(const Eigen::VectorXd&)> custom_value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> custom_grad;

  static CostSpec quadratic_identity(double alpha);
  static CostSpec quadratic_output(Eigen::MatrixXd C_out, double alpha);
  static CostSpec custom(std::function<double(const Eigen::VectorXd&)> value,
                         std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad,
                         double alpha);

  bool quadratic() const { return kind != CostKind::Custom; }
  double ell_x(const Eigen::VectorXd& x) const;
  Eigen::VectorXd ell_x_gradient(const Eigen::VectorXd& x) const;
  // Hessian of l_x for the quadratic kinds (I or C_out^T C_out).
  Eigen::MatrixXd ell_x_hessian(int n) const;
};

// Full problem data of the finite-horizon control-constrained problem
//   min int_0^{t_f} l_x(x) + (alpha/2)|u|^2
//   s.t. x' = A x + B u + f,  x(0) = x0,  u in [lower, upper] a.e.
struct OcpSpec {
  SystemMatrices sys;
  TimeGrid grid;
  GridFunction f;  // Intervals, dim n
  Eigen::VectorXd x0;
  CostSpec cost;
  std::optional<BoxSet> box;

  OcpSpec(SystemMatrices sys_, TimeGrid grid_, GridFunction f_, Eigen::VectorXd x0_,
          CostSpec cost_, std::optional<BoxSet> box_ = std::nullopt);

  int n() const { return sys.n(); }
  int m() const { return sys.m(); }
};

// Primal-dual solution of the discrete optimality system.  lambda is stored
// on Nodes with node 0 carrying lambda0 = lambda(0); interval values sit at
// the right endpoints (node k for interval k).
struct KktPoint {
  GridFunction x_star;   // Nodes, n
  GridFunction u_star;   // Intervals, m
  GridFunction lambda;   // Nodes, n
  Eigen::VectorXd lambda0;
  GridFunction mu;       // Intervals, m
};

struct KktSolveInfo {
  double residual = 0.0;
  long iterations = 0;
  double active_set_fraction = 0.0;
};

// Stacked flat coordinates used by the assembled optimality operators and
// flows:
//   unconstrained: [x: Nodes n | u: Intervals m | lambda: Intervals n | lambda0]
//   constrained:   [x: Nodes n | lambda: Intervals n | lambda0]
// The multiplier block lives on Intervals, matching the range of the
// constraint operator; KktPoint converts to the Nodes storage convention.
StateSpace open_unconstrained_space(const OcpSpec& spec);
StateSpace open_constrained_space(const OcpSpec& spec);

// L^2-gradient of the discrete cost: (gradient of l_x nodewise over the
// quadrature set, alpha u).  The node-0 slot of the x-part is zero: the
// quadrature does not see the left endpoint.
std::pair<GridFunction, GridFunction> grad_J(const OcpSpec& spec, const GridFunction& x,
                                             const GridFunction& u);

// Discrete cost value (quadrature over samples 1..N).
double cost_value(const OcpSpec& spec, const GridFunction& x, const GridFunction& u);

// The optimality-system operator.  Without a box: the affine saddle map
//   (x,u,lambda,lambda0) |-> (grad J + C*(lambda,lambda0), -C(x,u))
// over open_unconstrained_space.  With a box: the prox-reduced map on
// (x,lambda,lambda0) with u eliminated via u = P_F((1/alpha) B^T lambda).
MonotoneMap assemble_M_opt(const OcpSpec& spec);

// Independent oracle for the optimal point.  Unconstrained: one sparse
// solve of the KKT system.  Constrained: projected gradient with
// Barzilai-Borwein steps and Armijo fallback on the control-reduced problem,
// iterated to stationarity residual <= 1e-10.  Quadratic costs only.
KktPoint solve_kkt(const OcpSpec& spec, KktSolveInfo* info = nullptr,
                   const GridFunction* u_start = nullptr);

// Norm of the stacked optimality residuals (adjoint equation, state
// equation, prox-form complementarity).
double kkt_residual(const OcpSpec& spec, const KktPoint& p);

// Flat embedding of the oracle point into the open-loop state coordinates.
Eigen::VectorXd kkt_to_state(const OcpSpec& spec, const KktPoint& p, bool constrained_layout);

// Reverse direction: read a primal-dual point off an open-loop flow state.
// For the constrained layout the control is reconstructed pointwise as
// u = P_F((1/alpha) B^T lambda) and mu = B^T lambda - alpha u.
KktPoint state_to_kkt(const OcpSpec& spec, const Eigen::VectorXd& w, bool constrained_layout);

}  // namespace monoph
