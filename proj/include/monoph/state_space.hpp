#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "monoph/timegrid.hpp"

namespace monoph {

// One named block of a stacked flow state: either a grid function or a plain
// R^n slot.
struct BlockDesc {
  std::string name;
  bool is_grid = false;
  Layout layout = Layout::Nodes;
  int dim = 0;     // components per sample (grid) or vector length
  int offset = 0;  // flat offset
  int size = 0;    // flat length
};

// Flat coordinates of a stacked state together with the product-space
// inner-product weights: dt per grid sample, 1 per R^n slot.
class StateSpace {
 public:
  StateSpace(const TimeGrid& grid, std::vector<BlockDesc> blocks);

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return dim_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<BlockDesc>& blocks() const { return blocks_; }

  bool has(const std::string& name) const;
  const BlockDesc& block(const std::string& name) const;

  Eigen::VectorBlock<const Eigen::VectorXd> view(const Eigen::VectorXd& v,
                                                 const std::string& name) const;
  Eigen::VectorBlock<Eigen::VectorXd> view(Eigen::VectorXd& v, const std::string& name) const;

  double sdot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  double snorm(const Eigen::VectorXd& a) const;

  // Weighted norm of one block of `v`.
  double block_norm(const Eigen::VectorXd& v, const std::string& name) const;

 private:
  TimeGrid grid_;
  std::vector<BlockDesc> blocks_;
  int dim_ = 0;
  Eigen::VectorXd weights_;
};

// Convenience builder used by the flow assemblers.
class SpaceBuilder {
 public:
  explicit SpaceBuilder(const TimeGrid& grid) : grid_(grid) {}
  SpaceBuilder& grid_block(const std::string& name, Layout layout, int dim);
  SpaceBuilder& vec_block(const std::string& name, int dim);
  StateSpace finish() const { return StateSpace(grid_, blocks_); }

 private:
  TimeGrid grid_;
  std::vector<BlockDesc> blocks_;
};

}  // namespace monoph
