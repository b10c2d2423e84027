#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "monoph/flows.hpp"

namespace monoph {

enum class StepMethod { Rk4, ImplicitEuler };

struct IntegratorConfig {
  StepMethod method = StepMethod::Rk4;
  double dt = 0.0;  // 0: min(0.1 * grid dt, spectral step bound)
  double T = 1.0;
  int record_every = 1;
  double stop_tol = 0.0;          // early stop on ||rhs||; 0 disables
  bool allow_unstable_dt = false;  // override the RK4 step-size guard
};

// Recorded time series of an integrated flow plus monitor channels.  All
// channels are sampled from the same state snapshot.
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> inputs;  // populated when the flow has a port

  std::vector<double> state_norm;
  std::vector<double> shifted_norm;       // ||v - steady||
  std::vector<double> dissipation_rate;   // -<nonskew(v), v>
  std::vector<double> shifted_dissipation_rate;
  std::vector<double> plant_norm;
  std::vector<double> feasibility_margin;
  std::vector<Eigen::VectorXd> u_p;  // closed-loop feedback samples

  long steps_taken = 0;
  bool early_stopped = false;
  double dt_used = 0.0;
};

struct SpectralBound {
  double dt_cap = 0.0;
  double norm_estimate = 0.0;
  bool degenerate = false;  // probe could not excite the operator
};

// Power-iteration estimate of the local Jacobian norm of `rhs` near v_probe
// (20 finite-difference iterations); returns 2.5 / estimate as the suggested
// RK4 step cap.
SpectralBound spectral_step_bound(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rhs,
                                  const Eigen::VectorXd& v_probe);

// Fixed-step integration of the flow.  RK4 by default; ImplicitEuler uses
// the resolvent of the affine structure and is rejected for non-affine
// flows.  A time-dependent input signal may be supplied for flows with an
// input port.  Deterministic given identical arguments.
Trajectory integrate(const Flow& flow, const Eigen::VectorXd& v0, const IntegratorConfig& cfg,
                     const std::function<Eigen::VectorXd(double)>* input_signal = nullptr);

// Least-squares slope of log(channel) over the window [ta, tb].
double estimate_decay_rate(const std::vector<double>& times, const std::vector<double>& channel,
                           double ta, double tb);

// CSV columns: t, state_norm, shifted_norm, plant_norm, dissipation_rate,
// u_p components (closed loop), feasibility_margin.
void write_trajectory_csv(const Trajectory& traj, std::ostream& os);

}  // namespace monoph
