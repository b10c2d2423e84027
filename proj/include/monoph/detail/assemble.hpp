#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <vector>

namespace monoph::detail {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Triplet accumulator for block-structured sparse assembly.
struct TripletSink {
  std::vector<Eigen::Triplet<double>> trips;

  void add(int row_off, int col_off, const SpMat& m, double scale = 1.0) {
    for (int r = 0; r < m.rows(); ++r) {
      for (SpMat::InnerIterator it(m, r); it; ++it) {
        trips.emplace_back(row_off + r, col_off + static_cast<int>(it.col()),
                           scale * it.value());
      }
    }
  }

  void add_dense(int row_off, int col_off, const Eigen::MatrixXd& m, double scale = 1.0) {
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) {
        if (m(r, c) != 0.0) trips.emplace_back(row_off + r, col_off + c, scale * m(r, c));
      }
    }
  }

  void add_identity(int row_off, int col_off, int k, double scale = 1.0) {
    for (int i = 0; i < k; ++i) trips.emplace_back(row_off + i, col_off + i, scale);
  }

  SpMat build(int rows, int cols) const {
    SpMat m(rows, cols);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
  }
};

// Block diagonal with `count` copies of a dense block.
inline SpMat repeat_blockdiag(const Eigen::MatrixXd& block, int count, double scale = 1.0) {
  TripletSink sink;
  for (int k = 0; k < count; ++k) {
    sink.add_dense(k * static_cast<int>(block.rows()), k * static_cast<int>(block.cols()), block,
                   scale);
  }
  return sink.build(count * static_cast<int>(block.rows()),
                    count * static_cast<int>(block.cols()));
}

// Submatrix [r0, r1) x [c0, c1) extracted by triplet filtering.
inline SpMat slice(const SpMat& m, int r0, int r1, int c0, int c1) {
  TripletSink sink;
  for (int r = r0; r < r1; ++r) {
    for (SpMat::InnerIterator it(m, r); it; ++it) {
      if (it.col() >= c0 && it.col() < c1) {
        sink.trips.emplace_back(r - r0, static_cast<int>(it.col()) - c0, it.value());
      }
    }
  }
  return sink.build(r1 - r0, c1 - c0);
}

}  // namespace monoph::detail
