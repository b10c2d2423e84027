#include "monoph/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace monoph {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_number(const std::string& raw, const std::string& key, int line) {
  const std::string t = trim(raw);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || trim(end) != "") {
    throw ValidationError("value of '" + key + "' is not a number: '" + t + "'", line);
  }
  return v;
}

// Split a comma list at bracket depth 0.
std::vector<std::string> split_top(const std::string& body) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char ch : body) {
    if (ch == '[') ++depth;
    if (ch == ']') --depth;
    if (ch == ',' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty() || !parts.empty()) parts.push_back(cur);
  return parts;
}

}  // namespace

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

RunConfig RunConfig::parse_string(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("expected 'key = value'", line_no);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ValidationError("empty key", line_no);
    if (value.empty()) throw ValidationError("empty value for '" + key + "'", line_no);
    cfg.kv_[key] = {value, line_no};
  }
  return cfg;
}

void RunConfig::apply_override(const std::string& keyval) {
  const std::size_t eq = keyval.find('=');
  if (eq == std::string::npos || trim(keyval.substr(0, eq)).empty()) {
    throw ValidationError("override must have the form key=value: '" + keyval + "'");
  }
  kv_[trim(keyval.substr(0, eq))] = {trim(keyval.substr(eq + 1)), -1};
}

bool RunConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

int RunConfig::line_of(const std::string& key) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? -1 : it->second.second;
}

std::string RunConfig::get_string(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ValidationError("missing required key '" + key + "'");
  return it->second.first;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double RunConfig::get_double(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ValidationError("missing required key '" + key + "'");
  return parse_number(it->second.first, key, it->second.second);
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long RunConfig::get_int(const std::string& key) const {
  const double v = get_double(key);
  const long r = std::lround(v);
  if (v != static_cast<double>(r)) {
    throw ValidationError("value of '" + key + "' must be an integer", line_of(key));
  }
  return r;
}

long RunConfig::get_int(const std::string& key, long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("value of '" + key + "' must be a boolean", line_of(key));
}

Eigen::VectorXd RunConfig::get_vector(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ValidationError("missing required key '" + key + "'");
  const std::string raw = trim(it->second.first);
  const int line = it->second.second;
  if (raw.empty()) throw ValidationError("empty vector for '" + key + "'", line);
  if (raw.front() != '[') {
    Eigen::VectorXd v(1);
    v[0] = parse_number(raw, key, line);
    return v;
  }
  if (raw.back() != ']') throw ValidationError("unbalanced brackets in '" + key + "'", line);
  const auto parts = split_top(raw.substr(1, raw.size() - 2));
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = parse_number(parts[i], key, line);
  }
  return v;
}

Eigen::MatrixXd RunConfig::get_matrix(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ValidationError("missing required key '" + key + "'");
  const std::string raw = trim(it->second.first);
  const int line = it->second.second;
  if (raw.size() < 4 || raw.front() != '[' || raw.back() != ']') {
    throw ValidationError("matrix '" + key + "' must look like [[a, b], [c, d]]", line);
  }
  const auto rows = split_top(raw.substr(1, raw.size() - 2));
  std::vector<std::vector<double>> vals;
  for (const auto& r : rows) {
    const std::string rr = trim(r);
    if (rr.size() < 2 || rr.front() != '[' || rr.back() != ']') {
      throw ValidationError("matrix row in '" + key + "' must be bracketed", line);
    }
    const auto cols = split_top(rr.substr(1, rr.size() - 2));
    std::vector<double> row;
    for (const auto& c : cols) row.push_back(parse_number(c, key, line));
    if (!vals.empty() && row.size() != vals.front().size()) {
      throw ValidationError("ragged matrix in '" + key + "'", line);
    }
    vals.push_back(std::move(row));
  }
  if (vals.empty()) throw ValidationError("empty matrix in '" + key + "'", line);
  Eigen::MatrixXd m(vals.size(), vals.front().size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    for (std::size_t j = 0; j < vals.front().size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vals[i][j];
    }
  }
  return m;
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "problem.A",        "problem.B",          "problem.B_p",
      "problem.x0",       "problem.f",          "problem.t_f",
      "problem.N",        "problem.alpha",      "problem.cost",
      "problem.C_out",    "problem.u_min",      "problem.u_max",
      "flow",             "plant",              "plant.M",
      "plant.B_p",        "integrator.method",  "integrator.dt",
      "integrator.T",     "integrator.record_every", "integrator.stop_tol",
      "integrator.allow_unstable_dt",           "init",
      "init.radius",      "seed",               "out",
      "suites",           "debug.break_adjoint"};
  return keys;
}

Eigen::VectorXd broadcast(const Eigen::VectorXd& v, int size, const std::string& key, int line) {
  if (v.size() == size) return v;
  if (v.size() == 1) return Eigen::VectorXd::Constant(size, v[0]);
  throw ValidationError("'" + key + "' has " + std::to_string(v.size()) +
                            " entries, expected " + std::to_string(size),
                        line);
}

}  // namespace

BuiltProblem build_problem(const RunConfig& cfg) {
  for (const auto& [key, val] : cfg.entries()) {
    if (!known_keys().count(key)) {
      throw ValidationError("unknown key '" + key + "'", val.second);
    }
  }

  try {
    const Eigen::MatrixXd A = cfg.get_matrix("problem.A");
    if (A.rows() != A.cols()) {
      throw ValidationError("problem.A must be square", cfg.line_of("problem.A"));
    }
    const int n = static_cast<int>(A.rows());
    const Eigen::MatrixXd B = cfg.get_matrix("problem.B");
    if (B.rows() != n) {
      throw ValidationError("problem.B must have n rows", cfg.line_of("problem.B"));
    }
    const int m = static_cast<int>(B.cols());

    const double t_f = cfg.get_double("problem.t_f", 1.0);
    const long N = cfg.get_int("problem.N", 200);
    const double alpha = cfg.get_double("problem.alpha", 1.5);

    CostSpec cost = CostSpec::quadratic_identity(alpha);
    const std::string cost_kind = cfg.get_string("problem.cost", "identity");
    if (cost_kind == "output") {
      cost = CostSpec::quadratic_output(cfg.get_matrix("problem.C_out"), alpha);
    } else if (cost_kind != "identity") {
      throw ValidationError("problem.cost must be 'identity' or 'output'",
                            cfg.line_of("problem.cost"));
    }

    TimeGrid grid(t_f, static_cast<int>(N));
    const Eigen::VectorXd x0 =
        broadcast(cfg.get_vector("problem.x0"), n, "problem.x0", cfg.line_of("problem.x0"));

    GridFunction f(Layout::Intervals, n, grid);
    if (cfg.has("problem.f")) {
      const Eigen::VectorXd fc =
          broadcast(cfg.get_vector("problem.f"), n, "problem.f", cfg.line_of("problem.f"));
      f = GridFunction::constant(Layout::Intervals, fc, grid);
    }

    std::optional<BoxSet> box;
    if (cfg.has("problem.u_min") != cfg.has("problem.u_max")) {
      throw ValidationError("problem.u_min and problem.u_max must be given together");
    }
    if (cfg.has("problem.u_min")) {
      box.emplace(broadcast(cfg.get_vector("problem.u_min"), m, "problem.u_min",
                            cfg.line_of("problem.u_min")),
                  broadcast(cfg.get_vector("problem.u_max"), m, "problem.u_max",
                            cfg.line_of("problem.u_max")));
    }

    Eigen::MatrixXd B_p = B;
    if (cfg.has("problem.B_p")) B_p = cfg.get_matrix("problem.B_p");

    BuiltProblem prob{OcpSpec(SystemMatrices(A, B, B_p), grid, f, x0, cost, box),
                      std::nullopt,
                      FlowVariant::OpenU,
                      IntegratorConfig{},
                      InitKind::Zero,
                      1.0,
                      0,
                      "out",
                      {},
                      false};

    const std::string flow = cfg.get_string("flow", "open_u");
    if (flow == "open_u") {
      prob.variant = FlowVariant::OpenU;
    } else if (flow == "open_c") {
      prob.variant = FlowVariant::OpenC;
    } else if (flow == "closed_u") {
      prob.variant = FlowVariant::ClosedU;
    } else if (flow == "closed_c") {
      prob.variant = FlowVariant::ClosedC;
    } else {
      throw ValidationError("flow must be one of open_u, open_c, closed_u, closed_c",
                            cfg.line_of("flow"));
    }

    if (prob.variant == FlowVariant::ClosedU || prob.variant == FlowVariant::ClosedC) {
      const std::string plant = cfg.get_string("plant", "conserving2d");
      Eigen::MatrixXd plant_bp = B_p;
      if (cfg.has("plant.B_p")) plant_bp = cfg.get_matrix("plant.B_p");
      if (plant == "conserving2d") {
        prob.plant = PlantSpec::conserving2d();
      } else if (plant == "linear" || plant == "custom") {
        // 'custom' in a config file selects a user matrix; arbitrary
        // evaluations are only reachable through the library API.
        Eigen::MatrixXd M;
        if (cfg.has("plant.M")) {
          M = cfg.get_matrix("plant.M");
        } else if (plant == "linear") {
          M = Eigen::MatrixXd::Zero(plant_bp.rows(), plant_bp.rows());
        } else {
          throw ValidationError("plant = custom requires plant.M", cfg.line_of("plant"));
        }
        prob.plant = PlantSpec::linear(M, plant_bp);
      } else {
        throw ValidationError("plant must be one of conserving2d, linear, custom",
                              cfg.line_of("plant"));
      }
    }

    const std::string method = cfg.get_string("integrator.method", "rk4");
    if (method == "rk4") {
      prob.icfg.method = StepMethod::Rk4;
    } else if (method == "implicit_euler") {
      prob.icfg.method = StepMethod::ImplicitEuler;
    } else {
      throw ValidationError("integrator.method must be rk4 or implicit_euler",
                            cfg.line_of("integrator.method"));
    }
    prob.icfg.dt = cfg.get_double("integrator.dt", 0.0);
    prob.icfg.T = cfg.get_double("integrator.T", 10.0);
    prob.icfg.record_every = static_cast<int>(cfg.get_int("integrator.record_every", 100));
    prob.icfg.stop_tol = cfg.get_double("integrator.stop_tol", 0.0);
    prob.icfg.allow_unstable_dt = cfg.get_bool("integrator.allow_unstable_dt", false);
    if (prob.icfg.T <= 0.0 || prob.icfg.record_every < 1) {
      throw ValidationError("integrator.T must be positive and record_every >= 1");
    }

    const std::string init = cfg.get_string("init", "zero");
    if (init == "zero") {
      prob.init = InitKind::Zero;
    } else if (init == "plant") {
      prob.init = InitKind::Plant;
    } else if (init == "random") {
      prob.init = InitKind::Random;
    } else {
      throw ValidationError("init must be zero, plant or random", cfg.line_of("init"));
    }
    prob.init_radius = cfg.get_double("init.radius", 1.0);
    prob.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    prob.out_dir = cfg.get_string("out", "out");
    prob.break_adjoint = cfg.get_bool("debug.break_adjoint", false);

    const std::string suites =
        cfg.get_string("suites", "structural,monotonicity,passivity,integrator");
    std::size_t pos = 0;
    while (pos <= suites.size()) {
      const std::size_t comma = suites.find(',', pos);
      const std::string name =
          suites.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (!name.empty()) prob.suites.push_back(name);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return prob;
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    // Shape failures during construction become validation errors so the CLI
    // reports them uniformly before any run starts.
    throw ValidationError(e.what());
  }
}

Eigen::VectorXd initial_state(const BuiltProblem& prob, const Flow& flow) {
  Eigen::VectorXd v0 = Eigen::VectorXd::Zero(flow.space.dim());
  switch (prob.init) {
    case InitKind::Zero:
      break;
    case InitKind::Plant: {
      if (!flow.closed_loop()) {
        throw ValidationError("init = plant needs a closed-loop flow");
      }
      if (prob.ocp.x0.size() != flow.plant_dim) {
        throw ValidationError("init = plant requires n_p == n to reuse problem.x0");
      }
      v0.head(flow.plant_dim) = prob.ocp.x0;
      break;
    }
    case InitKind::Random: {
      std::uint64_t s = prob.seed ^ 0x9e3779b97f4a7c15ull;
      Eigen::VectorXd dir = sample_ball(flow.space.dim(), 1.0, flow.space.weights(), s);
      const double nrm = flow.space.snorm(dir);
      if (nrm > 0.0) dir *= prob.init_radius / nrm;
      v0 = flow.steady + dir;
      break;
    }
  }
  return v0;
}

}  // namespace monoph
