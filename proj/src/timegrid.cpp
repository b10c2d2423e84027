#include "monoph/timegrid.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace monoph {

TimeGrid::TimeGrid(double t_f_, int N_) : t_f(t_f_), N(N_), dt(t_f_ / N_) {
  if (!(t_f > 0.0) || !std::isfinite(t_f)) {
    throw ShapeError("TimeGrid: horizon t_f must be positive and finite");
  }
  if (N < 2) {
    throw ShapeError("TimeGrid: need at least N = 2 intervals");
  }
  if (std::abs(dt * N - t_f) > 4.0 * std::numeric_limits<double>::epsilon() * t_f) {
    throw ShapeError("TimeGrid: dt * N does not reproduce t_f");
  }
}

GridFunction::GridFunction(Layout layout, int dim, const TimeGrid& grid)
    : layout_(layout), dim_(dim), data_(Eigen::VectorXd::Zero(grid.samples(layout) * dim)) {
  if (dim <= 0) throw ShapeError("GridFunction: dim must be positive");
}

GridFunction::GridFunction(Layout layout, int dim, Eigen::VectorXd data)
    : layout_(layout), dim_(dim), data_(std::move(data)) {
  if (dim <= 0) throw ShapeError("GridFunction: dim must be positive");
  if (data_.size() % dim_ != 0) {
    throw ShapeError("GridFunction: data length is not a multiple of dim");
  }
  if (!data_.allFinite()) throw ShapeError("GridFunction: entries must be finite");
}

GridFunction GridFunction::constant(Layout layout, const Eigen::VectorXd& value,
                                    const TimeGrid& grid) {
  GridFunction g(layout, static_cast<int>(value.size()), grid);
  for (int j = 0; j < g.samples(); ++j) g.sample(j) = value;
  return g;
}

GridFunction GridFunction::zero(Layout layout, int dim, const TimeGrid& grid) {
  return GridFunction(layout, dim, grid);
}

namespace {

void check_compatible(const GridFunction& a, const GridFunction& b, const TimeGrid& grid) {
  if (a.layout() != b.layout() || a.dim() != b.dim()) {
    throw ShapeError("inner_product: mismatched layout or dim");
  }
  if (a.samples() != grid.samples(a.layout()) || b.samples() != grid.samples(b.layout())) {
    throw ShapeError("inner_product: sample count does not match grid");
  }
}

}  // namespace

double inner_product(const GridFunction& a, const GridFunction& b, const TimeGrid& grid) {
  check_compatible(a, b, grid);
  const int first = (a.layout() == Layout::Nodes) ? 1 : 0;
  double acc = 0.0;
  for (int j = first; j < a.samples(); ++j) {
    acc += a.sample(j).dot(b.sample(j));
  }
  return grid.dt * acc;
}

double norm(const GridFunction& a, const TimeGrid& grid) {
  return std::sqrt(inner_product(a, a, grid));
}

double stack_inner(const std::vector<StackPart>& a, const std::vector<StackPart>& b,
                   const TimeGrid& grid) {
  if (a.empty() || b.empty()) throw ShapeError("stack_inner: empty part list");
  if (a.size() != b.size()) throw ShapeError("stack_inner: part count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ga = std::holds_alternative<GridFunction>(a[i]);
    const bool gb = std::holds_alternative<GridFunction>(b[i]);
    if (ga != gb) throw ShapeError("stack_inner: part kind mismatch");
    if (ga) {
      const auto& fa = std::get<GridFunction>(a[i]);
      const auto& fb = std::get<GridFunction>(b[i]);
      if (fa.layout() != fb.layout() || fa.data().size() != fb.data().size()) {
        throw ShapeError("stack_inner: grid part shape mismatch");
      }
      acc += grid.dt * fa.data().dot(fb.data());
    } else {
      const auto& va = std::get<Eigen::VectorXd>(a[i]);
      const auto& vb = std::get<Eigen::VectorXd>(b[i]);
      if (va.size() != vb.size()) throw ShapeError("stack_inner: vector part size mismatch");
      acc += va.dot(vb);
    }
  }
  return acc;
}

double stack_inner(const std::vector<StackPart>& a, const TimeGrid& grid) {
  return stack_inner(a, a, grid);
}

void write_csv(const GridFunction& g, const TimeGrid& grid, std::ostream& os) {
  os << "tau";
  for (int i = 0; i < g.dim(); ++i) os << ",component_" << i;
  os << "\n";
  char buf[64];
  for (int j = 0; j < g.samples(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.12g", grid.tau(g.layout(), j));
    os << buf;
    for (int i = 0; i < g.dim(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.15g", g.sample(j)[i]);
      os << ',' << buf;
    }
    os << "\n";
  }
}

}  // namespace monoph
