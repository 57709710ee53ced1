#include "mcoh/oscillator_sim.hpp"

#include <cmath>
#include <random>
#include <string>

#include "mcoh/errors.hpp"
#include "mcoh/rng.hpp"

namespace mcoh {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_params(const SimParams& params) {
  if (!(params.dt > 0.0)) throw config_error("dt must be > 0");
  if (params.transient_steps < 0) throw config_error("transient_steps must be >= 0");
  if (params.measure_steps < 2) throw config_error("measure_steps must be >= 2");
}

// Scratch space reused across steps of one simulation.
struct Drift {
  explicit Drift(const Eigen::MatrixXd& coupling, double alpha)
      : c(coupling),
        inv_n(1.0 / static_cast<double>(coupling.rows())),
        sin_a(std::sin(alpha)),
        cos_a(std::cos(alpha)) {
    const auto n = coupling.rows();
    sin_p.resize(n);
    cos_p.resize(n);
    c_sin.resize(n);
    c_cos.resize(n);
  }

  // Coupled part of the velocity (omega excluded):
  //   u_i = -(1/N) [sin(p_i + a) (C cos p)_i - cos(p_i + a) (C sin p)_i].
  void eval(const Eigen::VectorXd& phases, Eigen::VectorXd& out) {
    sin_p = phases.array().sin();
    cos_p = phases.array().cos();
    c_sin.noalias() = c * sin_p;
    c_cos.noalias() = c * cos_p;
    out = -inv_n * ((sin_p.array() * cos_a + cos_p.array() * sin_a) * c_cos.array() -
                    (cos_p.array() * cos_a - sin_p.array() * sin_a) * c_sin.array());
  }

  const Eigen::MatrixXd& c;
  double inv_n, sin_a, cos_a;
  Eigen::VectorXd sin_p, cos_p, c_sin, c_cos;
};

Eigen::VectorXd wrap_phases(const Eigen::VectorXd& phases) {
  Eigen::VectorXd wrapped(phases.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    double p = std::fmod(phases(i), kTwoPi);
    if (p < 0.0) p += kTwoPi;
    wrapped(i) = p;
  }
  return wrapped;
}

}  // namespace

PhaseState initial_phases(int n, std::uint64_t seed) {
  if (n < 1) throw config_error("need at least one oscillator");
  auto engine = make_engine(seed);
  std::uniform_real_distribution<double> uniform(0.0, kTwoPi);
  PhaseState state;
  state.phases.resize(n);
  for (int i = 0; i < n; ++i) state.phases(i) = uniform(engine);
  state.time = 0.0;
  return state;
}

Eigen::VectorXd phase_velocity(const PhaseState& state,
                               const CouplingMatrix& coupling,
                               const SimParams& params) {
  if (state.size() != coupling.size())
    throw config_error("phase/coupling dimension mismatch");
  Drift drift(coupling.values, params.alpha);
  Eigen::VectorXd velocity(state.size());
  drift.eval(state.phases, velocity);
  velocity.array() += params.omega;
  return velocity;
}

PhaseState step(const PhaseState& state, const CouplingMatrix& coupling,
                const SimParams& params) {
  PhaseState next = state;
  next.phases += params.dt * phase_velocity(state, coupling, params);
  next.time += params.dt;
  return next;
}

SimulationSummary simulate_from(const PhaseState& initial,
                                const CouplingMatrix& coupling,
                                const SimParams& params) {
  check_params(params);
  const int n = coupling.size();
  if (initial.size() != n) throw config_error("phase/coupling dimension mismatch");

  Drift drift(coupling.values, params.alpha);
  Eigen::VectorXd phases = initial.phases;
  Eigen::VectorXd velocity(n);

  auto check_finite = [&](int step_no) {
    if (!phases.allFinite())
      throw numerical_error("non-finite phase at step " + std::to_string(step_no) +
                            "; dt too large for this coupling");
  };

  for (int k = 0; k < params.transient_steps; ++k) {
    drift.eval(phases, velocity);
    phases += params.dt * velocity;
    if ((k + 1) % 1000 == 0) check_finite(k + 1);
  }
  check_finite(params.transient_steps);

  // Welford accumulation keeps tiny standard deviations resolvable next to
  // O(1) means.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < params.measure_steps; ++k) {
    drift.eval(phases, velocity);
    const Eigen::ArrayXd delta = velocity.array() - mean.array();
    mean.array() += delta / static_cast<double>(k + 1);
    m2.array() += delta * (velocity.array() - mean.array());
    phases += params.dt * velocity;
  }
  check_finite(params.transient_steps + params.measure_steps);

  const int total = params.transient_steps + params.measure_steps;
  SimulationSummary summary;
  summary.window_index = coupling.window_index;
  summary.mean_velocity = mean.array() + params.omega;
  summary.velocity_std =
      (m2.array() / static_cast<double>(params.measure_steps)).sqrt();
  summary.final_phases =
      wrap_phases(phases.array() + params.omega * (total * params.dt));
  return summary;
}

SimulationSummary simulate(const CouplingMatrix& coupling, const SimParams& params) {
  return simulate_from(initial_phases(coupling.size(), params.seed), coupling, params);
}

}  // namespace mcoh
