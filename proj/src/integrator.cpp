#include "monoph/integrator.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <ostream>

namespace monoph {

SpectralBound spectral_step_bound(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rhs,
    const Eigen::VectorXd& v_probe) {
  const int dim = static_cast<int>(v_probe.size());
  const Eigen::VectorXd r0 = rhs(v_probe);
  std::uint64_t s = 0x0b5e55ed;
  Eigen::VectorXd d(dim);
  for (int i = 0; i < dim; ++i) d[i] = rng_normal(s);
  d.normalize();
  const double eps = 1e-6 * (1.0 + v_probe.norm());

  SpectralBound out;
  double nu = 0.0;
  for (int it = 0; it < 20; ++it) {
    const Eigen::VectorXd w = (rhs(v_probe + eps * d) - r0) / eps;
    nu = w.norm();
    if (!(nu > 1e-30)) {
      out.degenerate = true;
      out.norm_estimate = 0.0;
      out.dt_cap = 1e9;
      return out;
    }
    d = w / nu;
  }
  out.norm_estimate = nu;
  out.dt_cap = std::min(2.5 / nu, 1e9);
  out.degenerate = out.dt_cap >= 1e6;
  return out;
}

namespace {

void record_snapshot(const Flow& flow, const Eigen::VectorXd& v, double t,
                     const std::function<Eigen::VectorXd(double)>* input_signal,
                     Trajectory& traj) {
  traj.times.push_back(t);
  traj.states.push_back(v);
  traj.state_norm.push_back(flow.space.snorm(v));
  traj.shifted_norm.push_back(flow.space.snorm(v - flow.steady));

  const Eigen::VectorXd nsk = flow.nonskew(v);
  traj.dissipation_rate.push_back(-flow.space.sdot(nsk, v));
  const Eigen::VectorXd nsk_ref = flow.nonskew(flow.steady);
  traj.shifted_dissipation_rate.push_back(
      -flow.space.sdot(nsk - nsk_ref, v - flow.steady));

  traj.plant_norm.push_back(flow.plant_norm(v));
  traj.feasibility_margin.push_back(flow.feasibility_margin(v));
  if (flow.closed_loop()) traj.u_p.push_back(flow.feedback_u_p(v));
  if (flow.B_in) {
    traj.inputs.push_back(input_signal ? (*input_signal)(t) : flow.input_default);
  }
}

}  // namespace

Trajectory integrate(const Flow& flow, const Eigen::VectorXd& v0, const IntegratorConfig& cfg,
                     const std::function<Eigen::VectorXd(double)>* input_signal) {
  if (v0.size() != flow.space.dim()) throw ShapeError("integrate: state size mismatch");
  if (!(cfg.T > 0.0) || cfg.record_every < 1) {
    throw UsageError("integrate: need T > 0 and record_every >= 1");
  }
  if (input_signal && !flow.B_in) {
    throw UsageError("integrate: input signal supplied but the flow has no port");
  }

  auto rhs_at = [&](const Eigen::VectorXd& v, double t) {
    return input_signal ? flow.rhs(v, (*input_signal)(t)) : flow.rhs(v);
  };

  double dt = cfg.dt;
  if (cfg.method == StepMethod::Rk4) {
    const SpectralBound bound =
        spectral_step_bound([&](const Eigen::VectorXd& v) { return rhs_at(v, 0.0); }, v0);
    if (dt <= 0.0) {
      dt = std::min(0.1 * flow.space.grid().dt, bound.dt_cap);
    } else if (dt > bound.dt_cap && !cfg.allow_unstable_dt) {
      throw UsageError("integrate: dt exceeds the RK4 stability bound " +
                       std::to_string(bound.dt_cap) + "; set the override to proceed");
    }
  } else if (dt <= 0.0) {
    dt = 0.1 * flow.space.grid().dt;
  }

  if (cfg.method == StepMethod::ImplicitEuler) {
    if (!flow.affine) {
      throw UnsupportedError("integrate: implicit Euler needs an affine flow");
    }
    if (input_signal) {
      throw UnsupportedError("integrate: implicit Euler supports autonomous runs only");
    }
  }

  const long steps = std::max<long>(1, std::llround(cfg.T / dt));
  dt = cfg.T / static_cast<double>(steps);

  Trajectory traj;
  traj.dt_used = dt;
  Eigen::VectorXd v = v0;
  record_snapshot(flow, v, 0.0, input_signal, traj);

  // Implicit Euler: factor (I + dt L) once.
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  if (cfg.method == StepMethod::ImplicitEuler) {
    Eigen::SparseMatrix<double> sys = Eigen::SparseMatrix<double>(flow.affine->L) * dt;
    for (int i = 0; i < sys.rows(); ++i) sys.coeffRef(i, i) += 1.0;
    sys.makeCompressed();
    lu.compute(sys);
    if (lu.info() != Eigen::Success) {
      throw SolverError("integrate: implicit Euler factorization failed");
    }
  }

  Eigen::VectorXd k1, k2, k3, k4;
  for (long step = 1; step <= steps; ++step) {
    const double t = (step - 1) * dt;
    if (cfg.method == StepMethod::Rk4) {
      k1 = rhs_at(v, t);
      k2 = rhs_at(v + 0.5 * dt * k1, t + 0.5 * dt);
      k3 = rhs_at(v + 0.5 * dt * k2, t + 0.5 * dt);
      k4 = rhs_at(v + dt * k3, t + dt);
      v += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } else {
      v = lu.solve(Eigen::VectorXd(v - dt * flow.affine->b));
      if (lu.info() != Eigen::Success) throw SolverError("integrate: implicit Euler solve failed");
    }
    if (!v.allFinite()) {
      throw DivergenceError("integrate: state became non-finite", step);
    }
    traj.steps_taken = step;
    if (step % cfg.record_every == 0 || step == steps) {
      record_snapshot(flow, v, step * dt, input_signal, traj);
      if (cfg.stop_tol > 0.0 && flow.space.snorm(rhs_at(v, step * dt)) <= cfg.stop_tol) {
        traj.early_stopped = true;
        break;
      }
    }
  }
  return traj;
}

double estimate_decay_rate(const std::vector<double>& times, const std::vector<double>& channel,
                           double ta, double tb) {
  if (times.size() != channel.size()) throw UsageError("estimate_decay_rate: length mismatch");
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < ta || times[i] > tb) continue;
    if (!(channel[i] > 0.0)) {
      throw UsageError("estimate_decay_rate: channel must be positive on the window");
    }
    const double y = std::log(channel[i]);
    st += times[i];
    sy += y;
    stt += times[i] * times[i];
    sty += times[i] * y;
    ++count;
  }
  if (count < 2) throw UsageError("estimate_decay_rate: need at least two samples in the window");
  const double denom = count * stt - st * st;
  if (denom == 0.0) throw UsageError("estimate_decay_rate: degenerate window");
  return (count * sty - st * sy) / denom;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  const int mp = traj.u_p.empty() ? 0 : static_cast<int>(traj.u_p.front().size());
  os << "t,state_norm,shifted_norm,plant_norm,dissipation_rate";
  for (int i = 0; i < mp; ++i) os << ",u_p_" << i;
  os << ",feasibility_margin\n";
  char buf[64];
  auto put = [&](double x) {
    std::snprintf(buf, sizeof(buf), "%.15g", x);
    os << buf;
  };
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    put(traj.times[k]);
    os << ',';
    put(traj.state_norm[k]);
    os << ',';
    put(traj.shifted_norm[k]);
    os << ',';
    put(traj.plant_norm[k]);
    os << ',';
    put(traj.dissipation_rate[k]);
    for (int i = 0; i < mp; ++i) {
      os << ',';
      put(traj.u_p[k][i]);
    }
    os << ',';
    put(traj.feasibility_margin[k]);
    os << "\n";
  }
}

}  // namespace monoph
