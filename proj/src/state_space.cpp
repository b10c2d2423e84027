#include "monoph/state_space.hpp"

#include <cmath>

#include "monoph/errors.hpp"

namespace monoph {

StateSpace::StateSpace(const TimeGrid& grid, std::vector<BlockDesc> blocks)
    : grid_(grid), blocks_(std::move(blocks)) {
  int off = 0;
  for (auto& b : blocks_) {
    b.offset = off;
    b.size = b.is_grid ? grid_.samples(b.layout) * b.dim : b.dim;
    off += b.size;
  }
  dim_ = off;
  weights_.resize(dim_);
  for (const auto& b : blocks_) {
    weights_.segment(b.offset, b.size).setConstant(b.is_grid ? grid_.dt : 1.0);
  }
}

bool StateSpace::has(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return true;
  }
  return false;
}

const BlockDesc& StateSpace::block(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw ShapeError("StateSpace: no block named '" + name + "'");
}

Eigen::VectorBlock<const Eigen::VectorXd> StateSpace::view(const Eigen::VectorXd& v,
                                                           const std::string& name) const {
  const auto& b = block(name);
  if (v.size() != dim_) throw ShapeError("StateSpace: state size mismatch");
  return v.segment(b.offset, b.size);
}

Eigen::VectorBlock<Eigen::VectorXd> StateSpace::view(Eigen::VectorXd& v,
                                                     const std::string& name) const {
  const auto& b = block(name);
  if (v.size() != dim_) throw ShapeError("StateSpace: state size mismatch");
  return v.segment(b.offset, b.size);
}

double StateSpace::sdot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  if (a.size() != dim_ || b.size() != dim_) throw ShapeError("StateSpace: sdot size mismatch");
  return a.cwiseProduct(weights_).dot(b);
}

double StateSpace::snorm(const Eigen::VectorXd& a) const { return std::sqrt(sdot(a, a)); }

double StateSpace::block_norm(const Eigen::VectorXd& v, const std::string& name) const {
  const auto& b = block(name);
  const auto seg = v.segment(b.offset, b.size);
  const double w = b.is_grid ? grid_.dt : 1.0;
  return std::sqrt(w * seg.squaredNorm());
}

SpaceBuilder& SpaceBuilder::grid_block(const std::string& name, Layout layout, int dim) {
  BlockDesc b;
  b.name = name;
  b.is_grid = true;
  b.layout = layout;
  b.dim = dim;
  blocks_.push_back(b);
  return *this;
}

SpaceBuilder& SpaceBuilder::vec_block(const std::string& name, int dim) {
  BlockDesc b;
  b.name = name;
  b.is_grid = false;
  b.dim = dim;
  blocks_.push_back(b);
  return *this;
}

}  // namespace monoph
