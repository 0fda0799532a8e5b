#include "jcm/classical.hpp"

#include "jcm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace jcm {

namespace {

using State = std::array<double, 4>;

State to_state(const PhasePoint& x) { return {x.q_a, x.p_a, x.q_f, x.p_f}; }
PhasePoint to_point(const State& y) { return {y[0], y[1], y[2], y[3]}; }

// false when the point is inside the hard border margin, where the flow is
// singular and a trial step must be rejected.
bool eval_rhs(const ModelParams& p, const State& y, State& f) {
  const double r2 = y[0] * y[0] + y[1] * y[1];
  const double four_j = 4.0 * p.J;
  if (!(r2 <= four_j * (1.0 - kBorderMargin))) return false;
  const double s = std::sqrt(std::max(0.0, 1.0 - r2 / four_j));
  const double gp = p.g_plus();
  const double gm = p.g_minus();
  const double mix = gp * y[1] * y[3] + gm * y[0] * y[2];
  f[0] = -p.epsilon * y[1] - gp * y[3] * s + y[1] * mix / (four_j * s);
  f[1] = p.epsilon * y[0] + gm * y[2] * s - y[0] * mix / (four_j * s);
  f[2] = -p.omega0 * y[3] - gp * y[1] * s;
  f[3] = p.omega0 * y[2] + gm * y[0] * s;
  return std::isfinite(f[0]) && std::isfinite(f[1]) && std::isfinite(f[2]) &&
         std::isfinite(f[3]);
}

// Dormand-Prince 5(4) tableau with the quartic dense-output weights.
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0,
                 kA53 = 64448.0 / 6561.0, kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0,
                 kA63 = 46732.0 / 5247.0, kA64 = 49.0 / 176.0,
                 kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                 kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0,
                 kE4 = 71.0 / 1920.0, kE5 = -17253.0 / 339200.0,
                 kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;
constexpr double kD1 = -12715105075.0 / 11282082432.0,
                 kD3 = 87487479700.0 / 32700410799.0,
                 kD4 = -10690763975.0 / 1880347072.0,
                 kD5 = 701980252875.0 / 199316789632.0,
                 kD6 = -1453857185.0 / 822651844.0,
                 kD7 = 69997945.0 / 29380423.0;

// The controller runs well below the requested bound; that keeps the energy
// drift of a t = 100 run near 1e-9 at the default tol = 1e-10.
constexpr double kControllerMargin = 0.02;

class Dopri5 {
 public:
  Dopri5(const ModelParams& params, double tol, double max_step)
      : params_(params), tol_(kControllerMargin * tol), max_step_(max_step) {
    if (!(tol > 0.0)) throw std::invalid_argument("integration tol must be positive");
    if (!(max_step > 0.0)) throw std::invalid_argument("max_step must be positive");
  }

  void start(double t0, const State& y0) {
    t_ = t_prev_ = t0;
    y_ = y_prev_ = y0;
    if (!eval_rhs(params_, y_, k1_))
      throw NumericError("initial condition touches the spin phase-space border");
    h_ = 0.0;
  }

  double t_begin() const { return t_prev_; }
  double t_end() const { return t_; }
  const State& y() const { return y_; }

  // One accepted step towards t_limit; false once t_limit is reached.
  bool advance(double t_limit) {
    const double dir = t_limit > t_ ? 1.0 : -1.0;
    double remaining = (t_limit - t_) * dir;
    if (remaining <= 0.0) return false;

    if (h_ == 0.0) h_ = dir * std::min(1e-2, std::min(max_step_, remaining));

    for (int attempt = 0; attempt < 400; ++attempt) {
      double h = h_;
      if (std::abs(h) > max_step_) h = dir * max_step_;
      bool clamped = false;
      if (std::abs(h) >= remaining) {
        h = t_limit - t_;
        clamped = true;
      }
      if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t_)))
        throw NumericError(
            "step size underflow (singular spin-disk border) at t = " +
            std::to_string(t_));

      State k2, k3, k4, k5, k6, k7, y_new, y_stage;
      bool ok = true;
      auto stage = [&](State& k, const State& y) { return eval_rhs(params_, y, k); };

      for (int i = 0; i < 4; ++i) y_stage[i] = y_[i] + h * kA21 * k1_[i];
      ok = stage(k2, y_stage);
      if (ok) {
        for (int i = 0; i < 4; ++i)
          y_stage[i] = y_[i] + h * (kA31 * k1_[i] + kA32 * k2[i]);
        ok = stage(k3, y_stage);
      }
      if (ok) {
        for (int i = 0; i < 4; ++i)
          y_stage[i] = y_[i] + h * (kA41 * k1_[i] + kA42 * k2[i] + kA43 * k3[i]);
        ok = stage(k4, y_stage);
      }
      if (ok) {
        for (int i = 0; i < 4; ++i)
          y_stage[i] = y_[i] + h * (kA51 * k1_[i] + kA52 * k2[i] + kA53 * k3[i] +
                                    kA54 * k4[i]);
        ok = stage(k5, y_stage);
      }
      if (ok) {
        for (int i = 0; i < 4; ++i)
          y_stage[i] = y_[i] + h * (kA61 * k1_[i] + kA62 * k2[i] + kA63 * k3[i] +
                                    kA64 * k4[i] + kA65 * k5[i]);
        ok = stage(k6, y_stage);
      }
      if (ok) {
        for (int i = 0; i < 4; ++i)
          y_new[i] = y_[i] + h * (kB1 * k1_[i] + kB3 * k3[i] + kB4 * k4[i] +
                                  kB5 * k5[i] + kB6 * k6[i]);
        ok = stage(k7, y_new);  // FSAL stage, also guards the endpoint
      }

      double err = 0.0;
      if (ok) {
        for (int i = 0; i < 4; ++i) {
          const double e = h * (kE1 * k1_[i] + kE3 * k3[i] + kE4 * k4[i] +
                                kE5 * k5[i] + kE6 * k6[i] + kE7 * k7[i]);
          const double sk =
              tol_ + tol_ * std::max(std::abs(y_[i]), std::abs(y_new[i]));
          err += (e / sk) * (e / sk);
        }
        err = std::sqrt(err / 4.0);
        ok = std::isfinite(err);
      }

      if (!ok) {
        h_ = 0.5 * h;
        continue;
      }
      if (err > 1.0) {
        h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
        continue;
      }

      // Accepted: keep the dense-output coefficients for this interval.
      t_prev_ = t_;
      y_prev_ = y_;
      t_ = clamped ? t_limit : t_ + h;
      for (int i = 0; i < 4; ++i) {
        const double ydiff = y_new[i] - y_prev_[i];
        const double bspl = h * k1_[i] - ydiff;
        cont_[0][i] = y_prev_[i];
        cont_[1][i] = ydiff;
        cont_[2][i] = bspl;
        cont_[3][i] = ydiff - h * k7[i] - bspl;
        cont_[4][i] = h * (kD1 * k1_[i] + kD3 * k3[i] + kD4 * k4[i] +
                           kD5 * k5[i] + kD6 * k6[i] + kD7 * k7[i]);
      }
      y_ = y_new;
      k1_ = k7;
      const double grow = err == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(err, -0.2));
      h_ = h * std::max(0.2, grow);
      return true;
    }
    throw NumericError("integrator failed to find an acceptable step at t = " +
                       std::to_string(t_));
  }

  State dense(double t_eval) const {
    const double span = t_ - t_prev_;
    const double theta = span == 0.0 ? 0.0 : (t_eval - t_prev_) / span;
    const double s1 = 1.0 - theta;
    State y;
    for (int i = 0; i < 4; ++i)
      y[i] = cont_[0][i] +
             theta * (cont_[1][i] +
                      s1 * (cont_[2][i] + theta * (cont_[3][i] + s1 * cont_[4][i])));
    return y;
  }

  double dense_qf(double t_eval) const { return dense(t_eval)[2]; }

 private:
  ModelParams params_;
  double tol_;
  double max_step_;
  double t_ = 0.0, t_prev_ = 0.0, h_ = 0.0;
  State y_{}, y_prev_{}, k1_{};
  std::array<State, 5> cont_{};
};

double radius2_guard(const ModelParams& params, const PhasePoint& x,
                     const char* what) {
  const double r2 = x.spin_radius2();
  if (!(r2 <= 4.0 * params.J))
    throw std::invalid_argument(std::string(what) +
                                " violates the spin bound q_a^2 + p_a^2 <= 4J");
  return r2;
}

}  // namespace

double classical_hamiltonian(const PhasePoint& x, const ModelParams& params) {
  params.validate();
  const double r2 = radius2_guard(params, x, "phase point");
  const double s = std::sqrt(std::max(0.0, 1.0 - r2 / (4.0 * params.J)));
  return 0.5 * params.omega0 * (x.p_f * x.p_f + x.q_f * x.q_f) +
         0.5 * params.epsilon * (r2 - 2.0 * params.J) +
         s * (params.g_plus() * x.p_a * x.p_f + params.g_minus() * x.q_a * x.q_f);
}

std::array<double, 4> eom_rhs(const PhasePoint& x, const ModelParams& params) {
  params.validate();
  State f;
  if (!eval_rhs(params, to_state(x), f))
    throw NumericError(
        "equations of motion are singular within 1e-12 of the spin-disk border");
  return f;
}

Trajectory integrate_trajectory(const PhasePoint& ic, const ModelParams& params,
                                double t0, double t1,
                                const IntegrateOptions& opts) {
  params.validate();
  radius2_guard(params, ic, "initial condition");
  if (opts.sample_dt < 0.0)
    throw std::invalid_argument("sample_dt must be non-negative");

  Trajectory traj;
  const double e0 = classical_hamiltonian(ic, params);
  auto record = [&](double t, const State& y) {
    const PhasePoint x = to_point(y);
    traj.samples.push_back({t, x});
    traj.energy_drift = std::max(
        traj.energy_drift, std::abs(classical_hamiltonian(x, params) - e0));
  };

  Dopri5 stepper(params, opts.tol, opts.max_step);
  stepper.start(t0, to_state(ic));
  record(t0, to_state(ic));
  if (t1 == t0) return traj;

  const double dir = t1 > t0 ? 1.0 : -1.0;
  std::size_t next_sample = 1;
  while (stepper.advance(t1)) {
    if (opts.sample_dt > 0.0) {
      while (true) {
        const double ts = t0 + dir * static_cast<double>(next_sample) * opts.sample_dt;
        if ((ts - stepper.t_end()) * dir > 0.0 || (ts - t1) * dir > 0.0) break;
        record(ts, stepper.dense(ts));
        ++next_sample;
      }
    } else {
      record(stepper.t_end(), stepper.y());
    }
  }
  if (opts.sample_dt > 0.0 && traj.samples.back().t != t1)
    record(t1, stepper.y());
  return traj;
}

double solve_pf_for_energy(double q_a, double p_a, double q_f, double energy,
                           const ModelParams& params) {
  params.validate();
  const PhasePoint probe{q_a, p_a, q_f, 0.0};
  const double r2 = radius2_guard(params, probe, "section point");
  const double s = std::sqrt(std::max(0.0, 1.0 - r2 / (4.0 * params.J)));

  const double a = 0.5 * params.omega0;
  const double b = s * params.g_plus() * p_a;
  const double c = 0.5 * params.omega0 * q_f * q_f +
                   0.5 * params.epsilon * (r2 - 2.0 * params.J) +
                   s * params.g_minus() * q_a * q_f - energy;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0)
    throw NumericError("no real p_f on the shell E = " + std::to_string(energy) +
                       " at (q_a, p_a, q_f) = (" + std::to_string(q_a) + ", " +
                       std::to_string(p_a) + ", " + std::to_string(q_f) + ")");
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
  double best = -std::numeric_limits<double>::infinity();
  if (q / a > 0.0) best = std::max(best, q / a);
  if (q != 0.0 && c / q > 0.0) best = std::max(best, c / q);
  if (!std::isfinite(best) || best <= 0.0)
    throw NumericError("no positive p_f root on the shell E = " +
                       std::to_string(energy));

  // One Newton polish in p_f removes the quadratic-formula rounding.
  const double slope = params.omega0 * best + s * params.g_plus() * p_a;
  if (slope != 0.0) {
    const double res =
        classical_hamiltonian({q_a, p_a, q_f, best}, params) - energy;
    best -= res / slope;
  }
  return best;
}

std::vector<SectionPoint> section_crossings(const PhasePoint& ic,
                                            const ModelParams& params,
                                            const SectionOptions& opts) {
  params.validate();
  radius2_guard(params, ic, "initial condition");
  if (opts.n_crossings < 1)
    throw std::invalid_argument("n_crossings must be positive");

  const double guard =
      opts.t_guard > 0.0 ? opts.t_guard : 100.0 + 50.0 * opts.n_crossings;
  std::vector<SectionPoint> out;
  Dopri5 stepper(params, opts.tol, 0.2);
  stepper.start(0.0, to_state(ic));

  while (static_cast<int>(out.size()) < opts.n_crossings) {
    // A trajectory that runs into the singular disk border is not
    // extendable; without error_on_stall its crossing record simply ends.
    try {
      if (!stepper.advance(guard)) break;
    } catch (const NumericError&) {
      if (opts.error_on_stall) throw;
      break;
    }
    const double q0 = stepper.dense(stepper.t_begin())[2];
    const double q1 = stepper.y()[2];
    const bool crossed = (q0 < 0.0 && q1 >= 0.0) || (q0 > 0.0 && q1 <= 0.0);
    if (crossed) {
      double lo = stepper.t_begin(), hi = stepper.t_end();
      for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double qm = stepper.dense_qf(mid);
        if ((q0 < 0.0) == (qm < 0.0))
          lo = mid;
        else
          hi = mid;
      }
      const double t_cross = 0.5 * (lo + hi);
      const State y = stepper.dense(t_cross);
      if (y[3] > 0.0) out.push_back({y[0], y[1], t_cross, y[3]});
    }
  }
  if (static_cast<int>(out.size()) < opts.n_crossings && opts.error_on_stall)
    throw NumericError("found only " + std::to_string(out.size()) + " of " +
                       std::to_string(opts.n_crossings) +
                       " section crossings within the time guard");
  return out;
}

std::vector<std::vector<SectionPoint>> poincare_section(
    const std::vector<PhasePoint>& ics, const ModelParams& params,
    double energy, int n_crossings, int threads) {
  for (const PhasePoint& ic : ics)
    if (std::abs(classical_hamiltonian(ic, params) - energy) > 1e-8)
      throw std::invalid_argument(
          "section initial condition is off the energy shell by more than 1e-8");

  std::vector<std::vector<SectionPoint>> result(ics.size());
  parallel_for(ics.size(), threads, [&](std::size_t i) {
    SectionOptions opts;
    opts.n_crossings = n_crossings;
    result[i] = section_crossings(ics[i], params, opts);
    // The located crossing carries the dense-output interpolation error;
    // the reported field momentum is re-solved on the energy shell.
    for (SectionPoint& s : result[i])
      s.p_f = solve_pf_for_energy(s.q_a, s.p_a, 0.0, energy, params);
  });
  return result;
}

namespace {

struct MapResult {
  double q_a, p_a, t;
};

// k-th return of the (q_a, p_a) -> (q_a', p_a') section map at fixed energy.
MapResult section_map(double q_a, double p_a, int k, const ModelParams& params,
                      double energy, double tol) {
  const double p_f = solve_pf_for_energy(q_a, p_a, 0.0, energy, params);
  SectionOptions opts;
  opts.n_crossings = k;
  opts.tol = tol;
  opts.error_on_stall = true;
  opts.t_guard = 100.0 + 100.0 * k;
  const auto crossings =
      section_crossings({q_a, p_a, 0.0, p_f}, params, opts);
  const SectionPoint& last = crossings.back();
  return {last.q_a, last.p_a, last.t_cross};
}

}  // namespace

PeriodicOrbit refine_periodic_orbit(const SectionPoint& guess,
                                    const ModelParams& params, double energy,
                                    const RefineOptions& opts) {
  params.validate();

  // Crossing multiplicity from the seed's own crossing pattern: the return
  // count whose image lies nearest the seed.
  int multiplicity = 1;
  {
    const double p_f =
        solve_pf_for_energy(guess.q_a, guess.p_a, 0.0, energy, params);
    SectionOptions probe;
    probe.n_crossings = 4;
    probe.tol = opts.integration_tol;
    probe.t_guard = 600.0;
    const auto crossings =
        section_crossings({guess.q_a, guess.p_a, 0.0, p_f}, params, probe);
    if (crossings.empty())
      throw NumericError("seed trajectory never returns to the section");
    std::vector<double> dist;
    double best = std::numeric_limits<double>::infinity();
    for (const SectionPoint& s : crossings) {
      dist.push_back(std::hypot(s.q_a - guess.q_a, s.p_a - guess.p_a));
      best = std::min(best, dist.back());
    }
    // A seed is only periodic to its own precision, so successive returns of
    // a multiplicity-1 orbit scatter at the same scale: take the smallest
    // return count that comes comparably close.
    for (std::size_t k = 0; k < dist.size(); ++k) {
      if (dist[k] <= 10.0 * best + 1e-12) {
        multiplicity = static_cast<int>(k) + 1;
        break;
      }
    }
  }

  double x0 = guess.q_a, x1 = guess.p_a;
  double period = 0.0, residual = 0.0;
  const double h = opts.fd_step;
  Eigen::Matrix2d map_jac = Eigen::Matrix2d::Zero();
  bool converged = false;

  for (int iter = 0; iter < opts.max_iterations && !converged; ++iter) {
    const MapResult r =
        section_map(x0, x1, multiplicity, params, energy, opts.integration_tol);
    const double f0 = r.q_a - x0;
    const double f1 = r.p_a - x1;
    residual = std::hypot(f0, f1);
    period = r.t;
    if (residual < opts.residual_target) {
      converged = true;
      break;
    }

    auto column = [&](double dq, double dp) {
      const MapResult plus = section_map(x0 + dq, x1 + dp, multiplicity, params,
                                         energy, opts.integration_tol);
      const MapResult minus = section_map(x0 - dq, x1 - dp, multiplicity, params,
                                          energy, opts.integration_tol);
      return Eigen::Vector2d((plus.q_a - minus.q_a) / (2.0 * h),
                             (plus.p_a - minus.p_a) / (2.0 * h));
    };
    map_jac.col(0) = column(h, 0.0);
    map_jac.col(1) = column(0.0, h);

    const Eigen::Matrix2d newton = map_jac - Eigen::Matrix2d::Identity();
    const double det = newton.determinant();
    if (std::abs(det) < 1e-14)
      throw NumericError("singular return-map Jacobian during orbit refinement");
    const Eigen::Vector2d step =
        newton.inverse() * Eigen::Vector2d(f0, f1);
    x0 -= step(0);
    x1 -= step(1);
  }
  if (!converged)
    throw NumericError("periodic-orbit refinement did not converge in " +
                       std::to_string(opts.max_iterations) +
                       " iterations (residual " + std::to_string(residual) + ")");

  // Fresh linearization at the solution for the stability data.
  auto column = [&](double dq, double dp) {
    const MapResult plus = section_map(x0 + dq, x1 + dp, multiplicity, params,
                                       energy, opts.integration_tol);
    const MapResult minus = section_map(x0 - dq, x1 - dp, multiplicity, params,
                                        energy, opts.integration_tol);
    return Eigen::Vector2d((plus.q_a - minus.q_a) / (2.0 * h),
                           (plus.p_a - minus.p_a) / (2.0 * h));
  };
  map_jac.col(0) = column(h, 0.0);
  map_jac.col(1) = column(0.0, h);

  PeriodicOrbit orbit;
  orbit.ic = {x0, x1, 0.0, solve_pf_for_energy(x0, x1, 0.0, energy, params)};
  orbit.period = period;
  orbit.residual = residual;
  orbit.crossings_per_period = multiplicity;
  orbit.map_trace = map_jac.trace();
  const std::complex<double> tr(orbit.map_trace, 0.0);
  const std::complex<double> root =
      std::sqrt(tr * tr - 4.0 * map_jac.determinant());
  orbit.stability = {0.5 * (tr + root), 0.5 * (tr - root)};
  orbit.stable = std::abs(orbit.map_trace) < 2.0;
  return orbit;
}

SpinProjection spin_projection(const Trajectory& traj,
                               const ModelParams& params) {
  params.validate();
  SpinProjection proj;
  proj.border_radius = 2.0 * std::sqrt(params.J);
  proj.t.reserve(traj.samples.size());
  proj.q_a.reserve(traj.samples.size());
  proj.p_a.reserve(traj.samples.size());
  proj.radius.reserve(traj.samples.size());
  for (const auto& sample : traj.samples) {
    proj.t.push_back(sample.t);
    proj.q_a.push_back(sample.x.q_a);
    proj.p_a.push_back(sample.x.p_a);
    proj.radius.push_back(std::sqrt(sample.x.spin_radius2()));
  }
  return proj;
}

}  // namespace jcm
