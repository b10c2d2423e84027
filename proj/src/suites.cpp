#include "monoph/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "monoph/config.hpp"
#include "monoph/detail/assemble.hpp"

namespace monoph {

bool SuiteResult::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

std::vector<double> centered_difference_tolerance(const std::vector<double>& times,
                                                  const std::vector<double>& energy,
                                                  double factor) {
  const std::size_t K = times.size();
  std::vector<double> tol(K, std::numeric_limits<double>::infinity());
  if (K < 5) return tol;
  double emax = 0.0;
  for (double e : energy) emax = std::max(emax, std::abs(e));
  const double eps = std::numeric_limits<double>::epsilon();

  std::vector<double> third(K, 0.0);
  for (std::size_t k = 2; k + 2 < K; ++k) {
    const double h = 0.5 * (times[k + 1] - times[k - 1]);
    third[k] = std::abs(energy[k + 2] - 2.0 * energy[k + 1] + 2.0 * energy[k - 1] -
                        energy[k - 2]) /
               (2.0 * h * h * h);
  }
  third[0] = third[1] = third[2];
  third[K - 1] = third[K - 2] = third[K - 3];

  for (std::size_t k = 1; k + 1 < K; ++k) {
    const double h = 0.5 * (times[k + 1] - times[k - 1]);
    // Dilate the curvature estimate: a clamp kink inside the stencil shows
    // up in the neighbouring third differences as well.
    double t3 = third[k];
    for (std::size_t j = (k >= 2 ? k - 2 : 0); j <= std::min(k + 2, K - 1); ++j) {
      t3 = std::max(t3, third[j]);
    }
    tol[k] = factor * (h * h / 6.0 * t3 + eps * emax / h) + 1e-6 * (1.0 + emax);
  }
  return tol;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& name) {
  std::uint64_t h = master ^ 0xcbf29ce484222325ull;
  for (char c : name) h = (h ^ static_cast<std::uint64_t>(c)) * 0x100000001b3ull;
  return h;
}

// The supplied problem with a guaranteed symmetric box (used to assemble
// the constrained flows when the problem has none).
OcpSpec with_symmetric_box(const OcpSpec& spec) {
  if (spec.box && spec.box->symmetric(1e-14)) return spec;
  BoxSet box(Eigen::VectorXd::Constant(spec.m(), -1.0), Eigen::VectorXd::Constant(spec.m(), 1.0));
  return OcpSpec(spec.sys, spec.grid, spec.f, spec.x0, spec.cost, box);
}

PlantSpec monotone_test_plant(const OcpSpec& spec) {
  const int n_p = static_cast<int>(spec.sys.B_p.rows());
  Eigen::MatrixXd M = 0.1 * Eigen::MatrixXd::Identity(n_p, n_p);
  return PlantSpec::linear(M, spec.sys.B_p);
}

bool conserving_plant_fits(const OcpSpec& spec) {
  return spec.m() == 1 && spec.sys.B_p.rows() == 2 && spec.sys.B_p.cols() == 1;
}

CheckResult check_skew(const std::string& label,
                       const Eigen::SparseMatrix<double, Eigen::RowMajor>& K,
                       const Eigen::VectorXd& weights, std::uint64_t seed) {
  std::uint64_t s = seed;
  double worst = 0.0;
  const int dim = static_cast<int>(K.rows());
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::VectorXd v = sample_ball(dim, 5.0, weights, s);
    const double scale = weighted_dot(v, v, weights);
    if (scale == 0.0) continue;
    worst = std::max(worst, std::abs(weighted_dot(Eigen::VectorXd(K * v), v, weights)) / scale);
  }
  return {label, worst, 1e-12, worst <= 1e-12, 100};
}

}  // namespace

SuiteResult run_structural_suite(const OcpSpec& spec, std::uint64_t seed, bool break_adjoint) {
  const auto t0 = Clock::now();
  SuiteResult suite;
  suite.name = "structural";
  std::uint64_t s = derive_seed(seed, suite.name);

  // discrete adjointness (exact by construction; negative control available)
  {
    const LinearOp C = build_C(spec.sys, spec.grid);
    const LinearOp Cs = break_adjoint ? build_C_star_unweighted(C) : build_C_star(C);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const Eigen::VectorXd z = sample_ball(C.cols(), 5.0, C.in_weights, s);
      const Eigen::VectorXd p = sample_ball(C.rows(), 5.0, C.out_weights, s);
      const double lhs = weighted_dot(apply(C, z), p, C.out_weights);
      const double rhs = weighted_dot(z, apply(Cs, p), C.in_weights);
      worst = std::max(worst, std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + 1.0));
    }
    suite.checks.push_back({"adjointness <Cz,p> = <z,C*p> (relative)", worst, 1e-12,
                            worst <= 1e-12, 100});
  }

  // skew power neutrality of the assembled couplings
  {
    const OcpSpec boxed = with_symmetric_box(spec);
    const Flow ou = build_open_unconstrained(spec, false);
    suite.checks.push_back(check_skew("skew part of open_u", ou.K, ou.space.weights(), s));
    const Flow oc = build_open_constrained(boxed, false);
    suite.checks.push_back(check_skew("skew part of open_c", oc.K, oc.space.weights(), s));
    const PlantSpec lin = monotone_test_plant(spec);
    const Flow cu = build_closed_unconstrained(spec, lin);
    suite.checks.push_back(check_skew("skew part of closed_u (with coupling)", cu.K,
                                      cu.space.weights(), s));
    const Flow cc = build_closed_constrained(boxed, lin);
    suite.checks.push_back(check_skew("skew part of closed_c", cc.K, cc.space.weights(), s));
  }

  // box projection is firmly nonexpansive
  {
    const BoxSet box = spec.box ? *spec.box
                                : BoxSet(Eigen::VectorXd::Constant(spec.m(), -1.0),
                                         Eigen::VectorXd::Constant(spec.m(), 1.0));
    const int dim = 4 * spec.m();
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(dim);
    auto T = [&box](const Eigen::VectorXd& v) { return project_box(v, box); };
    const CertificateReport rep = certify_firmly_nonexpansive(T, dim, w, 1000, 5.0, s, 1e-12,
                                                              "P_F");
    suite.checks.push_back(
        {"P_F firmly nonexpansive (slack)", rep.worst_slack, 1e-12, rep.pass, rep.samples});
  }

  // Moreau decomposition is exact
  {
    const BoxSet box = spec.box ? *spec.box
                                : BoxSet(Eigen::VectorXd::Constant(spec.m(), -1.0),
                                         Eigen::VectorXd::Constant(spec.m(), 1.0));
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      const Eigen::VectorXd v =
          sample_ball(spec.m(), 5.0, Eigen::VectorXd::Ones(spec.m()), s);
      const Eigen::VectorXd sum = project_box(v, box) + moreau_complement(v, box);
      worst = std::max(worst, (sum - v).cwiseAbs().maxCoeff());
    }
    suite.checks.push_back({"Moreau decomposition P_F(v) + prox_sigma(v) = v", worst, 0.0,
                            worst == 0.0, 1000});
  }

  // energy neutrality of the conserving benchmark plant
  {
    const PlantSpec plant = PlantSpec::conserving2d();
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      const Eigen::VectorXd z = sample_ball(2, 3.0, Eigen::VectorXd::Ones(2), s);
      const Eigen::VectorXd mz = plant.M_p(z);
      const double scale = mz.norm() * z.norm() + 1e-300;
      worst = std::max(worst, std::abs(mz.dot(z)) / scale);
    }
    suite.checks.push_back({"plant energy neutrality <M_p(z), z> = 0 (relative)", worst, 1e-14,
                            worst <= 1e-14, 1000});
  }

  suite.seconds = seconds_since(t0);
  return suite;
}

SuiteResult run_monotonicity_suite(const OcpSpec& spec, std::uint64_t seed) {
  const auto t0 = Clock::now();
  SuiteResult suite;
  suite.name = "monotonicity";
  const std::uint64_t s = derive_seed(seed, suite.name);
  const OcpSpec boxed = with_symmetric_box(spec);
  const double tol = 1e-10;
  const int pairs = 1000;

  auto push = [&](const std::string& label, const CertificateReport& rep) {
    suite.checks.push_back({label, rep.worst_slack, tol, rep.worst_slack >= -tol, rep.samples});
  };

  push("open_u pairwise slack",
       certify_monotone(build_open_unconstrained(spec, false).M, pairs, 10.0, s ^ 1, tol));
  push("open_c pairwise slack",
       certify_monotone(build_open_constrained(boxed, false).M, pairs, 10.0, s ^ 2, tol));
  push("closed_u pairwise slack (linear monotone plant)",
       certify_monotone(build_closed_unconstrained(spec, monotone_test_plant(spec)).M, pairs,
                        10.0, s ^ 3, tol));
  if (conserving_plant_fits(spec)) {
    push("closed_u relative slack at 0 (conserving plant)",
         certify_monotone(build_closed_unconstrained(spec, PlantSpec::conserving2d()).M, pairs,
                          10.0, s ^ 4, tol));
    push("closed_c relative slack at 0 (conserving plant)",
         certify_monotone(build_closed_constrained(boxed, PlantSpec::conserving2d()).M, pairs,
                          10.0, s ^ 5, tol));
  } else {
    push("closed_c relative slack at 0 (linear monotone plant)",
         certify_monotone(build_closed_constrained(boxed, monotone_test_plant(spec)).M, pairs,
                          10.0, s ^ 5, tol));
  }

  suite.seconds = seconds_since(t0);
  return suite;
}

namespace {

struct IdentityChecks {
  double worst_plain = 0.0;
  double worst_shifted = 0.0;
  double worst_decrease_violation = 0.0;  // positive means the energy grew
  double tol_plain = 0.0;
  double tol_shifted = 0.0;
};

// Compare centered differences of the recorded energies with the recorded
// dissipation channels.
IdentityChecks dissipation_identities(const Flow& flow, const Trajectory& tr) {
  IdentityChecks out;
  const std::size_t K = tr.times.size();
  std::vector<double> e_plain(K), e_shift(K);
  for (std::size_t k = 0; k < K; ++k) {
    e_plain[k] = 0.5 * tr.state_norm[k] * tr.state_norm[k];
    e_shift[k] = 0.5 * tr.shifted_norm[k] * tr.shifted_norm[k];
  }
  const std::vector<double> tol_p = centered_difference_tolerance(tr.times, e_plain);
  const std::vector<double> tol_s = centered_difference_tolerance(tr.times, e_shift);
  for (std::size_t k = 1; k + 1 < K; ++k) {
    const double h2 = tr.times[k + 1] - tr.times[k - 1];
    const double fd_p = (e_plain[k + 1] - e_plain[k - 1]) / h2;
    const double fd_s = (e_shift[k + 1] - e_shift[k - 1]) / h2;
    out.worst_plain = std::max(out.worst_plain,
                               std::abs(fd_p - tr.dissipation_rate[k]) - tol_p[k]);
    out.worst_shifted = std::max(out.worst_shifted,
                                 std::abs(fd_s - tr.shifted_dissipation_rate[k]) - tol_s[k]);
    out.worst_decrease_violation = std::max(out.worst_decrease_violation, fd_s - tol_s[k]);
    out.tol_plain = std::max(out.tol_plain, tol_p[k] == std::numeric_limits<double>::infinity()
                                                ? 0.0
                                                : tol_p[k]);
    out.tol_shifted = std::max(out.tol_shifted,
                               tol_s[k] == std::numeric_limits<double>::infinity() ? 0.0
                                                                                   : tol_s[k]);
  }
  (void)flow;
  return out;
}

}  // namespace

SuiteResult run_passivity_suite(const OcpSpec& spec, std::uint64_t seed) {
  const auto t0 = Clock::now();
  SuiteResult suite;
  suite.name = "passivity";
  std::uint64_t s = derive_seed(seed, suite.name);
  const OcpSpec boxed = with_symmetric_box(spec);

  // Fine resolution: the energy channels carry stencil-frequency
  // oscillations, and the identity checks need both the differencing error
  // and the integrator defect on those modes to stay below the local-error
  // allowance.
  IntegratorConfig cfg;
  cfg.T = 1.0;
  cfg.dt = 1e-4;
  cfg.record_every = 2;

  auto random_start = [&](const Flow& flow, double radius) {
    Eigen::VectorXd dir = sample_ball(flow.space.dim(), 1.0, flow.space.weights(), s);
    const double nrm = flow.space.snorm(dir);
    if (nrm > 0.0) dir *= radius / nrm;
    return Eigen::VectorXd(flow.steady + dir);
  };

  auto run_identities = [&](const std::string& name, const Flow& flow,
                            const Eigen::VectorXd& v0) {
    const Trajectory tr = integrate(flow, v0, cfg);
    const IdentityChecks id = dissipation_identities(flow, tr);
    suite.checks.push_back({name + ": dissipation identity excess over local tol",
                            id.worst_plain, 0.0, id.worst_plain <= 0.0});
    suite.checks.push_back({name + ": shifted dissipation identity excess over local tol",
                            id.worst_shifted, 0.0, id.worst_shifted <= 0.0});
    return tr;
  };

  // open-loop unconstrained, autonomous at the steady input
  {
    const Flow flow = build_open_unconstrained(spec);
    const Trajectory tr = run_identities("open_u autonomous", flow, random_start(flow, 3.0));
    std::vector<double> e(tr.times.size());
    for (std::size_t k = 0; k < e.size(); ++k) {
      e[k] = 0.5 * tr.shifted_norm[k] * tr.shifted_norm[k];
    }
    const auto tolv = centered_difference_tolerance(tr.times, e);
    double tol = 0.0;
    for (std::size_t k = 1; k + 1 < tolv.size(); ++k) tol = std::max(tol, tolv[k]);
    const PassivityReport rep =
        check_shifted_passivity(tr.times, tr.states, tr.inputs, flow.steady, flow.input_default,
                                *flow.B_in, flow.space.weights(), tol);
    suite.checks.push_back({"open_u autonomous: shifted passivity violation",
                            rep.worst_violation, rep.tol, rep.pass});
  }

  // open-loop unconstrained with a randomized input signal
  {
    const Flow flow = build_open_unconstrained(spec);
    Eigen::VectorXd dir(flow.B_in->cols());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = rng_normal(s);
    dir *= 0.5 / std::sqrt(weighted_dot(dir, dir, flow.B_in->in_weights));
    const Eigen::VectorXd base = flow.input_default;
    std::function<Eigen::VectorXd(double)> signal = [base, dir](double t) {
      return Eigen::VectorXd(base + std::sin(2.0 * t) * dir);
    };
    const Trajectory tr = integrate(flow, random_start(flow, 3.0), cfg, &signal);
    std::vector<double> e(tr.times.size());
    for (std::size_t k = 0; k < e.size(); ++k) {
      e[k] = 0.5 * tr.shifted_norm[k] * tr.shifted_norm[k];
    }
    const auto tolv = centered_difference_tolerance(tr.times, e);
    double tol = 0.0;
    for (std::size_t k = 1; k + 1 < tolv.size(); ++k) tol = std::max(tol, tolv[k]);
    const PassivityReport rep =
        check_shifted_passivity(tr.times, tr.states, tr.inputs, flow.steady, flow.input_default,
                                *flow.B_in, flow.space.weights(), tol);
    suite.checks.push_back({"open_u randomized input: shifted passivity violation",
                            rep.worst_violation, rep.tol, rep.pass});
  }

  // open-loop constrained, autonomous
  {
    const Flow flow = build_open_constrained(boxed);
    run_identities("open_c autonomous", flow, random_start(flow, 3.0));
  }

  // closed loops with the conserving plant (origin is the steady state)
  if (conserving_plant_fits(spec)) {
    {
      const Flow flow = build_closed_unconstrained(spec, PlantSpec::conserving2d());
      Eigen::VectorXd v0 = Eigen::VectorXd::Zero(flow.space.dim());
      v0.head(2) = spec.x0.size() == 2 ? spec.x0 : Eigen::VectorXd::Constant(2, -1.0);
      const Trajectory tr = run_identities("closed_u", flow, v0);
      double worst = 0.0;
      for (std::size_t k = 1; k < tr.state_norm.size(); ++k) {
        worst = std::max(worst, tr.state_norm[k] - tr.state_norm[k - 1]);
      }
      suite.checks.push_back({"closed_u: state norm increase", worst, 1e-12, worst <= 1e-12});
    }
    {
      const Flow flow = build_closed_constrained(boxed, PlantSpec::conserving2d());
      Eigen::VectorXd v0 = Eigen::VectorXd::Zero(flow.space.dim());
      v0.head(2) = boxed.x0.size() == 2 ? boxed.x0 : Eigen::VectorXd::Constant(2, -1.0);
      const Trajectory tr = run_identities("closed_c", flow, v0);
      double worst = 0.0;
      for (std::size_t k = 1; k < tr.state_norm.size(); ++k) {
        worst = std::max(worst, tr.state_norm[k] - tr.state_norm[k - 1]);
      }
      suite.checks.push_back({"closed_c: state norm increase", worst, 1e-12, worst <= 1e-12});
    }
  }

  suite.seconds = seconds_since(t0);
  return suite;
}

namespace {

// Scalar test flow v' = -v used by the order and convergence checks.
Flow scalar_decay_flow() {
  TimeGrid grid(1.0, 2);
  StateSpace space = SpaceBuilder(grid).vec_block("v", 1).finish();
  Flow flow(space);
  flow.variant = FlowVariant::OpenU;
  flow.label = "scalar decay";
  flow.K = Eigen::SparseMatrix<double, Eigen::RowMajor>(1, 1);
  flow.M.dim = 1;
  flow.M.weights = Eigen::VectorXd::Ones(1);
  flow.M.label = "identity";
  flow.M.eval = [](const Eigen::VectorXd& v) { return v; };
  Eigen::SparseMatrix<double, Eigen::RowMajor> L(1, 1);
  L.insert(0, 0) = 1.0;
  flow.affine = AffineMap{L, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
  flow.steady = Eigen::VectorXd::Zero(1);
  return flow;
}

}  // namespace

SuiteResult run_integrator_suite(const OcpSpec& spec, std::uint64_t seed) {
  const auto t0 = Clock::now();
  SuiteResult suite;
  suite.name = "integrator";
  std::uint64_t s = derive_seed(seed, suite.name);

  // RK4 order on the scalar linear problem
  {
    const Flow flow = scalar_decay_flow();
    Eigen::VectorXd v0(1);
    v0 << 1.0;
    auto terminal_error = [&](double dt) {
      IntegratorConfig cfg;
      cfg.T = 1.0;
      cfg.dt = dt;
      cfg.record_every = 1000000;
      const Trajectory tr = integrate(flow, v0, cfg);
      return std::abs(tr.states.back()[0] - std::exp(-1.0));
    };
    const double ratio = terminal_error(0.05) / terminal_error(0.025);
    suite.checks.push_back({"RK4 halving factor on v' = -v", ratio, 20.0,
                            ratio >= 12.0 && ratio <= 20.0});
    const double err = terminal_error(1e-3);
    suite.checks.push_back({"RK4 terminal error at dt = 1e-3", err, 1e-8, err <= 1e-8});
  }

  // implicit Euler is nonexpansive around the steady state for every step size
  {
    const Flow flow = build_open_unconstrained(spec);
    if (flow.affine) {
      for (double dt : {0.01, 0.1, 1.0}) {
        Eigen::VectorXd dir = sample_ball(flow.space.dim(), 1.0, flow.space.weights(), s);
        dir *= 5.0 / flow.space.snorm(dir);
        IntegratorConfig cfg;
        cfg.method = StepMethod::ImplicitEuler;
        cfg.dt = dt;
        cfg.T = 40.0 * dt;
        cfg.record_every = 1;
        const Trajectory tr = integrate(flow, Eigen::VectorXd(flow.steady + dir), cfg);
        double worst = 0.0;
        for (std::size_t k = 1; k < tr.shifted_norm.size(); ++k) {
          worst = std::max(worst, tr.shifted_norm[k] - tr.shifted_norm[k - 1]);
        }
        const double tol = 1e-10 * tr.shifted_norm.front();
        suite.checks.push_back({"implicit Euler shifted-norm increase at dt = " +
                                    std::to_string(dt),
                                worst, tol, worst <= tol});
      }
    }
  }

  // spectral step bound examples
  {
    auto neg_identity = [](const Eigen::VectorXd& v) { return Eigen::VectorXd(-v); };
    const SpectralBound b1 = spectral_step_bound(neg_identity, Eigen::VectorXd::Zero(2));
    suite.checks.push_back({"step bound for -I", std::abs(b1.dt_cap - 2.5), 1e-3,
                            std::abs(b1.dt_cap - 2.5) <= 1e-3});

    auto stiff = [](const Eigen::VectorXd& v) {
      Eigen::VectorXd out(2);
      out << -50.0 * v[0], -1.0 * v[1];
      return out;
    };
    const SpectralBound b2 = spectral_step_bound(stiff, Eigen::VectorXd::Zero(2));
    const double rel = std::abs(b2.dt_cap - 0.05) / 0.05;
    suite.checks.push_back({"step bound for stiff diagonal (relative)", rel, 0.2, rel <= 0.2});

    auto zero = [](const Eigen::VectorXd& v) { return Eigen::VectorXd(0.0 * v); };
    const SpectralBound b3 = spectral_step_bound(zero, Eigen::VectorXd::Zero(2));
    suite.checks.push_back({"step bound for zero field (cap)", b3.dt_cap, 1e6,
                            b3.dt_cap >= 1e6 && b3.degenerate});
  }

  // decay-rate estimator examples
  {
    std::vector<double> times, chan;
    for (int k = 0; k <= 200; ++k) {
      times.push_back(0.01 * k);
      chan.push_back(std::exp(-2.0 * 0.01 * k));
    }
    const double rate = estimate_decay_rate(times, chan, 0.0, 2.0);
    suite.checks.push_back({"fitted rate of exp(-2t)", std::abs(rate + 2.0), 1e-3,
                            std::abs(rate + 2.0) <= 1e-3});
    std::vector<double> flat(times.size(), 0.7);
    const double zero_rate = estimate_decay_rate(times, flat, 0.0, 2.0);
    suite.checks.push_back({"fitted rate of a constant", std::abs(zero_rate), 1e-12,
                            std::abs(zero_rate) <= 1e-12});
  }

  suite.seconds = seconds_since(t0);
  return suite;
}

std::vector<SuiteResult> run_suites(const std::vector<std::string>& names, const OcpSpec& spec,
                                    std::uint64_t seed, bool break_adjoint) {
  std::vector<SuiteResult> out;
  for (const auto& name : names) {
    if (name == "structural") {
      out.push_back(run_structural_suite(spec, seed, break_adjoint));
    } else if (name == "monotonicity") {
      out.push_back(run_monotonicity_suite(spec, seed));
    } else if (name == "passivity") {
      out.push_back(run_passivity_suite(spec, seed));
    } else if (name == "integrator") {
      out.push_back(run_integrator_suite(spec, seed));
    } else {
      throw ValidationError("unknown suite '" + name + "'");
    }
  }
  return out;
}

void print_suite(const SuiteResult& suite, std::ostream& os) {
  os << "suite " << suite.name << (suite.pass() ? "  [pass]" : "  [FAIL]") << "  ("
     << suite.seconds << " s)\n";
  char buf[64];
  for (const auto& c : suite.checks) {
    std::snprintf(buf, sizeof(buf), "%.3e", c.worst);
    os << "  " << (c.pass ? "[pass] " : "[FAIL] ") << c.label << ": worst " << buf;
    std::snprintf(buf, sizeof(buf), "%.3e", c.tol);
    os << " (tol " << buf;
    if (c.samples > 0) os << ", " << c.samples << " samples";
    os << ")\n";
  }
}

}  // namespace monoph
