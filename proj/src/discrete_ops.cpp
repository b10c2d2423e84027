#include "monoph/discrete_ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <ostream>
#include <vector>

namespace monoph {

namespace {

void check_weights(const Eigen::VectorXd& w, const char* what) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
      throw ShapeError(std::string("LinearOp: ") + what + " weights must be strictly positive");
    }
  }
}

void check_same_space(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what) {
  if (a.size() != b.size() || (a - b).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + a.cwiseAbs().maxCoeff())) {
    throw ShapeError(std::string("LinearOp: incompatible spaces in ") + what);
  }
}

}  // namespace

LinearOp make_op(const Eigen::SparseMatrix<double, Eigen::RowMajor>& mat,
                 Eigen::VectorXd in_weights, Eigen::VectorXd out_weights) {
  if (mat.cols() != in_weights.size() || mat.rows() != out_weights.size()) {
    throw ShapeError("LinearOp: weight vector sizes do not match matrix dimensions");
  }
  check_weights(in_weights, "input");
  check_weights(out_weights, "output");
  return LinearOp{mat, std::move(in_weights), std::move(out_weights)};
}

LinearOp make_op_dense(const Eigen::MatrixXd& mat, Eigen::VectorXd in_weights,
                       Eigen::VectorXd out_weights) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> sp = mat.sparseView();
  return make_op(sp, std::move(in_weights), std::move(out_weights));
}

Eigen::VectorXd apply(const LinearOp& op, const Eigen::VectorXd& v) {
  if (v.size() != op.cols()) throw ShapeError("apply: vector length does not match op columns");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(op.rows());
  for (int r = 0; r < op.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(op.mat, r); it; ++it) {
      acc += it.value() * v[it.col()];
    }
    out[r] = acc;
  }
  return out;
}

LinearOp adjoint(const LinearOp& op) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> t = op.mat.transpose();
  for (int r = 0; r < t.rows(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(t, r); it; ++it) {
      it.valueRef() *= op.out_weights[it.col()] / op.in_weights[r];
    }
  }
  return LinearOp{t, op.out_weights, op.in_weights};
}

LinearOp compose(const LinearOp& a, const LinearOp& b) {
  if (a.cols() != b.rows()) throw ShapeError("compose: dimension chain mismatch");
  check_same_space(a.in_weights, b.out_weights, "compose");
  Eigen::SparseMatrix<double, Eigen::RowMajor> prod = a.mat * b.mat;
  return LinearOp{prod, b.in_weights, a.out_weights};
}

LinearOp scaled(const LinearOp& op, double s) {
  LinearOp r = op;
  r.mat *= s;
  return r;
}

double weighted_dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& w) {
  if (a.size() != b.size() || a.size() != w.size()) {
    throw ShapeError("weighted_dot: size mismatch");
  }
  return a.cwiseProduct(w).dot(b);
}

void dump_matrix_market(const LinearOp& op, std::ostream& os) {
  os << op.rows() << ' ' << op.cols() << ' ' << op.mat.nonZeros() << '\n';
  char buf[64];
  for (int r = 0; r < op.rows(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(op.mat, r); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%.17g", it.value());
      os << (r + 1) << ' ' << (it.col() + 1) << ' ' << buf << '\n';
    }
  }
}

namespace {

void check_injective(const Eigen::MatrixXd& B) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) throw ShapeError("SystemMatrices: B is empty");
  const double tol = 1e-10 * sv[0];
  if (sv[sv.size() - 1] <= tol) {
    throw ShapeError("SystemMatrices: B must have full column rank");
  }
}

}  // namespace

SystemMatrices::SystemMatrices(Eigen::MatrixXd A_, Eigen::MatrixXd B_, Eigen::MatrixXd B_p_)
    : A(std::move(A_)), B(std::move(B_)), B_p(std::move(B_p_)) {
  if (A.rows() != A.cols()) throw ShapeError("SystemMatrices: A must be square");
  if (B.rows() != A.rows()) throw ShapeError("SystemMatrices: B row count must equal n");
  check_injective(B);
}

SystemMatrices::SystemMatrices(Eigen::MatrixXd A_, Eigen::MatrixXd B_)
    : SystemMatrices(A_, B_, B_) {}

LinearOp build_C(const SystemMatrices& sys, const TimeGrid& grid) {
  const int n = sys.n();
  const int m = sys.m();
  const int N = grid.N;
  const double dt = grid.dt;
  const int x_size = (N + 1) * n;
  const int u_size = N * m;
  const int rows = N * n + n;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(N) * (2 * n + n * n + n * m) + n);
  for (int k = 1; k <= N; ++k) {
    const int ro = (k - 1) * n;
    for (int i = 0; i < n; ++i) {
      trips.emplace_back(ro + i, k * n + i, 1.0 / dt);
      trips.emplace_back(ro + i, (k - 1) * n + i, -1.0 / dt);
      for (int j = 0; j < n; ++j) {
        if (sys.A(i, j) != 0.0) trips.emplace_back(ro + i, k * n + j, -sys.A(i, j));
      }
      for (int j = 0; j < m; ++j) {
        if (sys.B(i, j) != 0.0) trips.emplace_back(ro + i, x_size + (k - 1) * m + j, -sys.B(i, j));
      }
    }
  }
  for (int i = 0; i < n; ++i) trips.emplace_back(N * n + i, i, 1.0);

  Eigen::SparseMatrix<double, Eigen::RowMajor> mat(rows, x_size + u_size);
  mat.setFromTriplets(trips.begin(), trips.end());

  Eigen::VectorXd in_w = Eigen::VectorXd::Constant(x_size + u_size, dt);
  Eigen::VectorXd out_w(rows);
  out_w.head(N * n).setConstant(dt);
  out_w.tail(n).setOnes();
  return LinearOp{mat, std::move(in_w), std::move(out_w)};
}

LinearOp build_C_star(const LinearOp& C) { return adjoint(C); }

LinearOp build_C_star_unweighted(const LinearOp& C) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> t = C.mat.transpose();
  return LinearOp{t, C.out_weights, C.in_weights};
}

LinearOp build_skew_coupling(const LinearOp& B1_1, const LinearOp& B2_1, const LinearOp& E) {
  check_same_space(E.out_weights, B1_1.in_weights, "build_skew_coupling (E out vs B1 in)");
  check_same_space(E.in_weights, B2_1.in_weights, "build_skew_coupling (E in vs B2 in)");

  const LinearOp top_right = scaled(compose(compose(B1_1, E), adjoint(B2_1)), -1.0);
  const LinearOp bottom_left = compose(compose(B2_1, adjoint(E)), adjoint(B1_1));

  const int n1 = B1_1.rows();
  const int n2 = B2_1.rows();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(top_right.mat.nonZeros() + bottom_left.mat.nonZeros());
  for (int r = 0; r < n1; ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(top_right.mat, r); it;
         ++it) {
      trips.emplace_back(r, n1 + static_cast<int>(it.col()), it.value());
    }
  }
  for (int r = 0; r < n2; ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(bottom_left.mat, r); it;
         ++it) {
      trips.emplace_back(n1 + r, static_cast<int>(it.col()), it.value());
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> mat(n1 + n2, n1 + n2);
  mat.setFromTriplets(trips.begin(), trips.end());

  Eigen::VectorXd w(n1 + n2);
  w.head(n1) = B1_1.out_weights;
  w.tail(n2) = B2_1.out_weights;
  return LinearOp{mat, w, w};
}

}  // namespace monoph
