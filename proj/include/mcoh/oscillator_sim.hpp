#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <numbers>

#include "mcoh/market_data.hpp"

namespace mcoh {

struct SimParams {
  double omega = 0.0;                                  // shared natural frequency
  double alpha = std::numbers::pi / 2.0 - 0.10;        // phase lag
  double dt = 0.01;
  int transient_steps = 10000;
  int measure_steps = 1000;
  std::uint64_t seed = 0;
};

// Unwrapped phases; wrapping happens only when snapshots are reported.
struct PhaseState {
  Eigen::VectorXd phases;
  double time = 0.0;

  int size() const { return static_cast<int>(phases.size()); }
};

struct SimulationSummary {
  Eigen::VectorXd mean_velocity;  // time average of instantaneous velocity
  Eigen::VectorXd velocity_std;   // population std of the same samples
  Eigen::VectorXd final_phases;   // wrapped to [0, 2*pi)
  int window_index = -1;
};

// i.i.d. uniform phases on [0, 2*pi); deterministic in (n, seed).
PhaseState initial_phases(int n, std::uint64_t seed);

// Instantaneous velocity:
//   v_i = omega - (1/N) sum_j C_ij sin(theta_i - theta_j + alpha),
// self-term included. Evaluated through the identity
//   sin(ti - tj + a) = sin(ti + a) cos(tj) - cos(ti + a) sin(tj)
// so each call costs two matrix-vector products instead of N^2 sines.
Eigen::VectorXd phase_velocity(const PhaseState& state,
                               const CouplingMatrix& coupling,
                               const SimParams& params);

// One explicit Euler step: theta += dt * v(theta), time += dt.
PhaseState step(const PhaseState& state, const CouplingMatrix& coupling,
                const SimParams& params);

// Runs transient_steps Euler steps, discards them, then measure_steps more;
// velocity is sampled at the state preceding each measurement step.
//
// The frequency term is integrated in a co-moving frame: the coupled part
// advances with omega = 0 and omega enters the velocity samples and the
// final snapshot additively (identical step algebra in exact arithmetic, and
// it keeps sigma bitwise independent of omega). Throws numerical_error if a
// phase stops being finite.
SimulationSummary simulate(const CouplingMatrix& coupling, const SimParams& params);

// Same protocol from an explicit initial state instead of seeded phases.
SimulationSummary simulate_from(const PhaseState& initial,
                                const CouplingMatrix& coupling,
                                const SimParams& params);

}  // namespace mcoh
