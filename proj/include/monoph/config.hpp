#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "monoph/flows.hpp"
#include "monoph/integrator.hpp"
#include "monoph/ocp.hpp"

namespace monoph {

// Flat key = value configuration with `block.key` prefixes.  Matrices are
// bracketed row lists ([[0,-1],[1,0]]), vectors bracketed lists, '#' starts
// a comment.  Later assignments win, which is what --override relies on.
class RunConfig {
 public:
  static RunConfig parse_file(const std::string& path);
  static RunConfig parse_string(const std::string& text, const std::string& origin = "<string>");

  // key=value (or key = value) applied on top of the file contents.
  void apply_override(const std::string& keyval);

  bool has(const std::string& key) const;
  int line_of(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  Eigen::VectorXd get_vector(const std::string& key) const;
  Eigen::MatrixXd get_matrix(const std::string& key) const;

  const std::map<std::string, std::pair<std::string, int>>& entries() const { return kv_; }
  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, std::pair<std::string, int>> kv_;  // key -> (raw, line)
  std::string origin_;
};

enum class InitKind { Zero, Plant, Random };

// Everything a command needs, validated.
struct BuiltProblem {
  OcpSpec ocp;
  std::optional<PlantSpec> plant;
  FlowVariant variant = FlowVariant::OpenU;
  IntegratorConfig icfg;
  InitKind init = InitKind::Zero;
  double init_radius = 1.0;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::vector<std::string> suites;
  bool break_adjoint = false;
};

// Full validation; throws ValidationError with the offending line number.
BuiltProblem build_problem(const RunConfig& cfg);

// Initial state for the selected flow per the init policy.
Eigen::VectorXd initial_state(const BuiltProblem& prob, const Flow& flow);

}  // namespace monoph
