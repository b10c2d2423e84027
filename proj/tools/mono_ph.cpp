// mono-ph: configuration-driven front end for the monotone
// port-Hamiltonian optimal-control toolkit.
//
//   mono-ph run    <config>   integrate the configured flow, write CSV/JSON
//   mono-ph verify <config>   run the property suites
//   mono-ph oracle <config>   solve the optimality system, write the point
//
// Exit codes: 0 success, 2 validation failure, 3 divergence, 4 suite failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "monoph/config.hpp"
#include "monoph/integrator.hpp"
#include "monoph/suites.hpp"

using namespace monoph;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("config", args.config_path, "path to the run configuration")->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides the config)");
  cmd->add_option("--seed", args.seed, "RNG seed (overrides the config)");
  cmd->add_option("--override", args.overrides, "key=value override, repeatable");
}

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg = RunConfig::parse_file(args.config_path);
  for (const auto& kv : args.overrides) cfg.apply_override(kv);
  if (!args.out_dir.empty()) cfg.apply_override("out=" + args.out_dir);
  if (args.seed >= 0) cfg.apply_override("seed=" + std::to_string(args.seed));
  return cfg;
}

json config_echo(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& [key, val] : cfg.entries()) j[key] = val.first;
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write '" + path.string() + "'");
  os << text;
}

void write_kkt_point(const OcpSpec& spec, const KktPoint& p, const KktSolveInfo& info,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto dump = [&](const GridFunction& g, const std::string& name) {
    std::ofstream os(dir / name);
    write_csv(g, spec.grid, os);
  };
  dump(p.x_star, "x_star.csv");
  dump(p.u_star, "u_star.csv");
  dump(p.lambda, "lambda.csv");
  dump(p.mu, "mu.csv");
  {
    std::ofstream os(dir / "lambda0.csv");
    for (int i = 0; i < p.lambda0.size(); ++i) os << (i ? "," : "") << "component_" << i;
    os << "\n";
    char buf[64];
    for (int i = 0; i < p.lambda0.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.15g", p.lambda0[i]);
      os << (i ? "," : "") << buf;
    }
    os << "\n";
  }
  json summary = {{"residual", info.residual},
                  {"iterations", info.iterations},
                  {"active_set_fraction", info.active_set_fraction}};
  write_file(dir / "summary.json", summary.dump(2) + "\n");
}

int cmd_run(const CommonArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = load_config(args);
  const BuiltProblem prob = build_problem(cfg);
  const Flow flow =
      build_flow(prob.variant, prob.ocp, prob.plant ? &*prob.plant : nullptr, true);
  const Eigen::VectorXd v0 = initial_state(prob, flow);

  const Trajectory traj = integrate(flow, v0, prob.icfg);

  std::filesystem::create_directories(prob.out_dir);
  {
    std::ofstream os(std::filesystem::path(prob.out_dir) / "trajectory.csv");
    write_trajectory_csv(traj, os);
  }

  const Eigen::VectorXd& vT = traj.states.back();
  json report;
  report["config"] = config_echo(cfg);
  report["flow"] = to_string(prob.variant);
  report["dt"] = traj.dt_used;
  report["steps"] = traj.steps_taken;
  report["records"] = traj.times.size();
  report["early_stopped"] = traj.early_stopped;
  report["terminal"] = {{"t", traj.times.back()},
                        {"rhs_norm", flow.space.snorm(flow.rhs(vT))},
                        {"state_norm", traj.state_norm.back()},
                        {"shifted_norm", traj.shifted_norm.back()},
                        {"plant_norm", traj.plant_norm.back()}};

  if (!flow.closed_loop() && prob.ocp.cost.quadratic()) {
    // distance of the terminal (x, u) blocks to the oracle optimum
    KktSolveInfo info;
    const KktPoint oracle = solve_kkt(prob.ocp, &info);
    const bool constrained = prob.variant == FlowVariant::OpenC;
    const Eigen::VectorXd ref = kkt_to_state(prob.ocp, oracle, constrained);
    const double dt = prob.ocp.grid.dt;
    const Eigen::VectorXd dx = flow.space.view(vT, "x") - flow.space.view(ref, "x");
    double sq = dt * dx.squaredNorm();
    if (constrained) {
      const KktPoint term = state_to_kkt(prob.ocp, vT, true);
      sq += dt * (term.u_star.data() - oracle.u_star.data()).squaredNorm();
      report["oracle"] = {{"residual", info.residual},
                         {"terminal_kkt_residual", kkt_residual(prob.ocp, term)}};
    } else {
      const Eigen::VectorXd du = flow.space.view(vT, "u") - flow.space.view(ref, "u");
      sq += dt * du.squaredNorm();
      report["oracle"] = {{"residual", info.residual}};
    }
    report["oracle"]["distance_xu"] = std::sqrt(sq);
  }

  report["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file(std::filesystem::path(prob.out_dir) / "report.json", report.dump(2) + "\n");

  std::cout << "run " << to_string(prob.variant) << ": " << traj.steps_taken << " steps, dt "
            << traj.dt_used << ", terminal state norm " << traj.state_norm.back() << "\n";
  if (report.contains("oracle")) {
    std::cout << "  distance to oracle (x,u): " << report["oracle"]["distance_xu"] << "\n";
  }
  std::cout << "  wrote " << prob.out_dir << "/trajectory.csv and report.json\n";
  return 0;
}

int cmd_oracle(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  const BuiltProblem prob = build_problem(cfg);
  KktSolveInfo info;
  const KktPoint p = solve_kkt(prob.ocp, &info);
  write_kkt_point(prob.ocp, p, info, prob.out_dir);
  std::cout << "oracle: residual " << info.residual << ", iterations " << info.iterations
            << ", active set fraction " << info.active_set_fraction << "\n"
            << "  wrote " << prob.out_dir << "/{x_star,u_star,lambda,lambda0,mu}.csv\n";
  return 0;
}

int cmd_verify(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  const BuiltProblem prob = build_problem(cfg);
  const auto suites = run_suites(prob.suites, prob.ocp, prob.seed, prob.break_adjoint);

  json report;
  report["config"] = config_echo(cfg);
  report["suites"] = json::array();
  bool all_pass = true;
  for (const auto& suite : suites) {
    print_suite(suite, std::cout);
    json js = {{"name", suite.name}, {"pass", suite.pass()}, {"seconds", suite.seconds}};
    js["checks"] = json::array();
    for (const auto& c : suite.checks) {
      js["checks"].push_back({{"label", c.label},
                              {"worst", c.worst},
                              {"tol", c.tol},
                              {"pass", c.pass},
                              {"samples", c.samples}});
    }
    report["suites"].push_back(js);
    all_pass = all_pass && suite.pass();
  }
  std::filesystem::create_directories(prob.out_dir);
  write_file(std::filesystem::path(prob.out_dir) / "verify.json", report.dump(2) + "\n");
  std::cout << (all_pass ? "all suites passed" : "SUITE FAILURE") << "\n";
  return all_pass ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"monotone port-Hamiltonian optimal-control toolkit"};
  app.require_subcommand(1);

  CommonArgs run_args, verify_args, oracle_args;
  CLI::App* run = app.add_subcommand("run", "integrate the configured flow");
  add_common(run, run_args);
  CLI::App* verify = app.add_subcommand("verify", "run the property suites");
  add_common(verify, verify_args);
  CLI::App* oracle = app.add_subcommand("oracle", "solve the optimality system");
  add_common(oracle, oracle_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (verify->parsed()) return cmd_verify(verify_args);
    if (oracle->parsed()) return cmd_oracle(oracle_args);
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
