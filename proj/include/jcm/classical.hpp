#pragma once

#include <array>
#include <complex>
#include <vector>

#include "jcm/model.hpp"

namespace jcm {

// H = omega0/2 (p_f^2 + q_f^2) + epsilon/2 (p_a^2 + q_a^2 - 2J)
//   + sqrt(1 - r^2/4J) (G+ p_a p_f + G- q_a q_f),   G+- = G +- Gprime.
double classical_hamiltonian(const PhasePoint& x, const ModelParams& params);

// Flow with the reversed-sign convention qdot = -dH/dp, pdot = +dH/dq. It
// conserves H identically (it is the time reverse of the canonical flow) and
// is the convention every section and orbit here is defined in. Rates are
// returned as {qdot_a, pdot_a, qdot_f, pdot_f}. The derivative is singular at
// the disk border; points within kBorderMargin of it are rejected.
std::array<double, 4> eom_rhs(const PhasePoint& x, const ModelParams& params);

struct TrajectorySample {
  double t;
  PhasePoint x;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double energy_drift = 0.0;  // max |H(t) - H(0)| over samples
};

struct IntegrateOptions {
  double tol = 1e-10;     // local error tolerance (atol = rtol = tol)
  double max_step = 0.2;
  double sample_dt = 0.0;  // > 0: uniform dense-output grid; 0: accepted steps
};

// Adaptive Dormand-Prince 5(4) with a quartic dense interpolant. Integrates
// from t0 to t1 in either direction. Throws NumericError on border contact
// (step-size underflow against the singular disk border).
Trajectory integrate_trajectory(const PhasePoint& ic, const ModelParams& params,
                                double t0, double t1,
                                const IntegrateOptions& opts = {});

// Largest positive root of H(q_a, p_a, q_f, p_f) = energy, solved as a
// quadratic in p_f. Throws NumericError when no real positive root exists.
double solve_pf_for_energy(double q_a, double p_a, double q_f, double energy,
                           const ModelParams& params);

// Crossing of the surface q_f = 0 with p_f > 0, located on the dense output
// to |q_f| < 1e-10.
struct SectionPoint {
  double q_a = 0.0;
  double p_a = 0.0;
  double t_cross = 0.0;
  double p_f = 0.0;
};

struct SectionOptions {
  int n_crossings = 300;
  double tol = 1e-10;
  double t_guard = 0.0;     // 0: derived from n_crossings
  bool error_on_stall = false;
};

// Collects up to n_crossings section points. Chaotic trajectories can run
// into the singular disk border in finite time; unless error_on_stall is
// set, the crossing record of such a trajectory simply ends there.
std::vector<SectionPoint> section_crossings(const PhasePoint& ic,
                                            const ModelParams& params,
                                            const SectionOptions& opts);

// Per-IC crossing sequences at fixed energy. Every IC must satisfy
// |H(ic) - energy| <= 1e-8. Distinct ICs are independent and run on the
// given number of worker threads.
std::vector<std::vector<SectionPoint>> poincare_section(
    const std::vector<PhasePoint>& ics, const ModelParams& params,
    double energy, int n_crossings, int threads = 1);

struct PeriodicOrbit {
  PhasePoint ic;             // on the section, p_f solved from the energy
  double period = 0.0;
  double residual = 0.0;     // return-map displacement norm at convergence
  int crossings_per_period = 1;
  std::array<std::complex<double>, 2> stability{};  // return-map eigenvalues
  double map_trace = 0.0;
  bool stable = false;       // |map_trace| < 2
};

struct RefineOptions {
  int max_iterations = 50;
  double residual_target = 1e-8;
  double integration_tol = 1e-11;
  double fd_step = 1e-5;  // central differences for the map Jacobian
};

// Newton iteration on the (q_a, p_a) section return map at fixed energy, with
// p_f eliminated through solve_pf_for_energy. The crossing multiplicity of the
// orbit is detected from the seed's own crossing pattern.
PeriodicOrbit refine_periodic_orbit(const SectionPoint& guess,
                                    const ModelParams& params, double energy,
                                    const RefineOptions& opts = {});

struct SpinProjection {
  std::vector<double> t, q_a, p_a, radius;
  double border_radius = 0.0;  // sqrt(4J)
};

SpinProjection spin_projection(const Trajectory& traj,
                               const ModelParams& params);

}  // namespace jcm
