#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <iosfwd>

#include "monoph/timegrid.hpp"

namespace monoph {

// Sparse linear map between weighted coordinate spaces.  The in/out weight
// vectors are the diagonal inner-product weights (dt per grid sample, 1 per
// R^n slot) and must be strictly positive.
struct LinearOp {
  Eigen::SparseMatrix<double, Eigen::RowMajor> mat;
  Eigen::VectorXd in_weights;
  Eigen::VectorXd out_weights;

  int rows() const { return static_cast<int>(mat.rows()); }
  int cols() const { return static_cast<int>(mat.cols()); }
};

LinearOp make_op(const Eigen::SparseMatrix<double, Eigen::RowMajor>& mat,
                 Eigen::VectorXd in_weights, Eigen::VectorXd out_weights);
LinearOp make_op_dense(const Eigen::MatrixXd& mat, Eigen::VectorXd in_weights,
                       Eigen::VectorXd out_weights);

// Sparse matrix-vector product with deterministic row-major accumulation.
Eigen::VectorXd apply(const LinearOp& op, const Eigen::VectorXd& v);

// Weighted adjoint W_in^{-1} A^T W_out; satisfies
// <A z, p>_out == <z, adjoint(A) p>_in exactly for all z, p.
LinearOp adjoint(const LinearOp& op);

LinearOp compose(const LinearOp& a, const LinearOp& b);  // a after b
LinearOp scaled(const LinearOp& op, double s);

// Weighted pairing sum_i w_i a_i b_i.
double weighted_dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& w);

// Debug dump: header "rows cols nnz", then one "i j value" triplet per line (1-based).
void dump_matrix_market(const LinearOp& op, std::ostream& os);

// Problem matrices.  B must have full column rank (checked at construction
// with tolerance 1e-10 * ||B||).
struct SystemMatrices {
  Eigen::MatrixXd A;    // n x n
  Eigen::MatrixXd B;    // n x m, injective
  Eigen::MatrixXd B_p;  // n_p x m_p plant input map

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int n_p() const { return static_cast<int>(B_p.rows()); }
  int m_p() const { return static_cast<int>(B_p.cols()); }

  SystemMatrices(Eigen::MatrixXd A_, Eigen::MatrixXd B_, Eigen::MatrixXd B_p_);
  SystemMatrices(Eigen::MatrixXd A_, Eigen::MatrixXd B_);  // B_p := B
};

// Implicit-Euler discretization of the constraint operator:
//   (x, u) |-> (r, r0),
//   r_k = (x_k - x_{k-1})/dt - A x_k - B u_k,  k = 1..N   (Intervals, dim n)
//   r0  = x_0                                              (R^n block)
// Flat input layout [x: Nodes n | u: Intervals m], output [r: Intervals n | r0].
LinearOp build_C(const SystemMatrices& sys, const TimeGrid& grid);

// The discrete adjoint of build_C, constructed as the exact weighted
// transpose.  The backward-difference stencil, the terminal condition
// lambda(t_f) = 0 and the lambda0 = lambda(0) row all emerge from the
// transposition rather than being imposed.
LinearOp build_C_star(const LinearOp& C);

// Plain transpose without inner-product weights.  Deliberately wrong adjoint,
// used as a negative control by the verification suites.
LinearOp build_C_star_unweighted(const LinearOp& C);

// Skew block coupling of two systems through E (power-preserving
// interconnection):
//   K = [ 0,                -B1_1 E (B2_1)^* ;
//         B2_1 E^* (B1_1)^*, 0               ]
// acting on the stacked state; skew-adjoint w.r.t. the stacked weights.
LinearOp build_skew_coupling(const LinearOp& B1_1, const LinearOp& B2_1, const LinearOp& E);

}  // namespace monoph
