#pragma once

#include <functional>
#include <optional>
#include <string>

#include "monoph/monotone.hpp"
#include "monoph/ocp.hpp"
#include "monoph/state_space.hpp"

namespace monoph {

enum class PlantKind { Conserving2d, Linear, Custom };

// Plant x_p' = -M_p(x_p) + B_p u_p with collocated output y_p = B_p^T x_p.
// M_p(0) = 0 is enforced at construction.
struct PlantSpec {
  int n_p = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> M_p;
  Eigen::MatrixXd B_p;
  PlantKind kind = PlantKind::Linear;
  MonotonicityKind mono = MonotonicityKind::Pairwise;

  int m_p() const { return static_cast<int>(B_p.cols()); }

  // The energy-conserving benchmark plant M_p(z) = J2 (1 + |z|^2) z with
  // J2 = [[0,1],[-1,0]] and B_p = (0,1)^T.  <M_p(z), z> = 0 for all z; the
  // map is relative monotone at 0 but not pairwise monotone.
  static PlantSpec conserving2d();

  // Linear plant M_p(z) = M z; the symmetric part of M must be positive
  // semidefinite (pairwise monotone).
  static PlantSpec linear(const Eigen::MatrixXd& M, const Eigen::MatrixXd& B_p);

  static PlantSpec custom(int n_p, std::function<Eigen::VectorXd(const Eigen::VectorXd&)> M_p,
                          const Eigen::MatrixXd& B_p, MonotonicityKind mono);
};

Eigen::VectorXd plant_rhs(const PlantSpec& plant, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& u_p);

enum class FlowVariant { OpenU, OpenC, ClosedU, ClosedC };

std::string to_string(FlowVariant v);

// An assembled flow v' = -M(v) (+ B_in u(t) for the open-loop variants).
// M splits as M(v) = K v + nonskew(v) with K exactly skew-adjoint in the
// stacked weights; the nonskew part carries the monotone blocks and the
// constant input terms.  `steady` is the registered reference point for
// shifted monitors (the oracle point for open-loop flows, the origin for the
// closed loop).
struct Flow {
  explicit Flow(StateSpace s) : space(std::move(s)) {}

  FlowVariant variant = FlowVariant::OpenU;
  std::string label;
  StateSpace space;
  MonotoneMap M;
  Eigen::SparseMatrix<double, Eigen::RowMajor> K;
  std::optional<AffineMap> affine;
  Eigen::VectorXd steady;
  std::optional<LinearOp> B_in;
  Eigen::VectorXd input_default;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> u_p_of;  // closed-loop only
  // instantaneous control used for the feasibility monitor
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> control_of;
  std::optional<BoxSet> box;
  int plant_dim = 0;

  Eigen::VectorXd rhs(const Eigen::VectorXd& v) const { return -M.eval(v); }
  Eigen::VectorXd rhs(const Eigen::VectorXd& v, const Eigen::VectorXd& input) const;
  Eigen::VectorXd nonskew(const Eigen::VectorXd& v) const { return M.eval(v) - K * v; }

  bool closed_loop() const {
    return variant == FlowVariant::ClosedU || variant == FlowVariant::ClosedC;
  }
  // Plant input implied by the interconnection; UsageError on open-loop states.
  Eigen::VectorXd feedback_u_p(const Eigen::VectorXd& v) const;
  double plant_norm(const Eigen::VectorXd& v) const;
  // Distance of the instantaneous control to the box boundary (+inf without
  // a box; negative would mean infeasible).
  double feasibility_margin(const Eigen::VectorXd& v) const;
};

// w = (x, u, lambda, lambda0):
//   (x,u)'          = -grad J(x,u) - C*(lambda, lambda0)
//   (lambda,lambda0)' =  C(x,u) - (f, x0)
Flow build_open_unconstrained(const OcpSpec& spec, bool with_oracle_steady = true);

// Prox-reduced selection with u eliminated via u = P_F((1/alpha) B^T lambda):
// w = (x, lambda, lambda0).
Flow build_open_constrained(const OcpSpec& spec, bool with_oracle_steady = true);

// Plant coupled to the unconstrained optimizer through the skew
// interconnection u_p = (1/alpha) B^T lambda0, u_o = (0, (1/alpha) B B_p^T x_p).
Flow build_closed_unconstrained(const OcpSpec& spec, const PlantSpec& plant);

// Saturated coupling (requires a symmetric box):
//   u_p = 0.5 P_F((1/alpha) B^T lambda0) - 0.5 P_F(B_p^T x_p),
// guaranteed feasible; the optimizer receives the matching saturated input.
Flow build_closed_constrained(const OcpSpec& spec, const PlantSpec& plant);

Flow build_flow(FlowVariant variant, const OcpSpec& spec, const PlantSpec* plant,
                bool with_oracle_steady = true);

}  // namespace monoph
