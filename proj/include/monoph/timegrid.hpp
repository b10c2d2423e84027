#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <variant>
#include <vector>

#include "monoph/errors.hpp"

namespace monoph {

// Sample layouts on the uniform grid over [0, t_f]:
//   Nodes:     N+1 samples at tau_k = k*dt, k = 0..N (states, adjoints)
//   Intervals: N samples at the right endpoints tau_k = k*dt, k = 1..N
//              (controls, residuals; piecewise constant on (tau_{k-1}, tau_k])
enum class Layout { Nodes, Intervals };

struct TimeGrid {
  double t_f;
  int N;
  double dt;

  TimeGrid(double t_f_, int N_);

  int samples(Layout l) const { return l == Layout::Nodes ? N + 1 : N; }

  // Grid time of storage index j (0-based).
  double tau(Layout l, int j) const { return l == Layout::Nodes ? j * dt : (j + 1) * dt; }
};

// Time-indexed array of real vectors in flat storage, sample-major:
// data[j*dim + i] is component i of sample j.
class GridFunction {
 public:
  GridFunction(Layout layout, int dim, const TimeGrid& grid);
  GridFunction(Layout layout, int dim, Eigen::VectorXd data);

  Layout layout() const { return layout_; }
  int dim() const { return dim_; }
  int samples() const { return static_cast<int>(data_.size()) / dim_; }

  Eigen::VectorXd& data() { return data_; }
  const Eigen::VectorXd& data() const { return data_; }

  Eigen::VectorBlock<Eigen::VectorXd> sample(int j) { return data_.segment(j * dim_, dim_); }
  Eigen::VectorBlock<const Eigen::VectorXd> sample(int j) const {
    return data_.segment(j * dim_, dim_);
  }

  bool all_finite() const { return data_.allFinite(); }

  static GridFunction constant(Layout layout, const Eigen::VectorXd& value, const TimeGrid& grid);
  static GridFunction zero(Layout layout, int dim, const TimeGrid& grid);

 private:
  Layout layout_;
  int dim_;
  Eigen::VectorXd data_;
};

// Quadrature pairing, the discrete surrogate for the L^2 inner product:
// dt * sum over samples k = 1..N.  For the Nodes layout the left endpoint
// (k = 0) is excluded, which aligns node/interval pairings with the
// implicit-Euler residual stencil.
double inner_product(const GridFunction& a, const GridFunction& b, const TimeGrid& grid);

double norm(const GridFunction& a, const TimeGrid& grid);

// A stacked-state part: a time-indexed block or a plain R^n block.
using StackPart = std::variant<GridFunction, Eigen::VectorXd>;

// Product-space pairing over stacked parts.  GridFunction parts are weighted
// by dt on every stored sample (for Nodes this includes the left endpoint,
// so the stacked pairing is a genuine inner product on the flat state and
// the weighted-transpose adjoint is exactly skew-compatible); R^n parts get
// weight 1.  For Interval parts this coincides with inner_product.
double stack_inner(const std::vector<StackPart>& a, const std::vector<StackPart>& b,
                   const TimeGrid& grid);
double stack_inner(const std::vector<StackPart>& a, const TimeGrid& grid);

// CSV: one row per sample, columns tau, component_0..component_{dim-1}.
void write_csv(const GridFunction& g, const TimeGrid& grid, std::ostream& os);

}  // namespace monoph
