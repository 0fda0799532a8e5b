#include "jcm/quantum.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "jcm/parallel.hpp"

namespace jcm {

namespace {

void check_normalized(const Eigen::VectorXcd& psi, const char* what) {
  if (std::abs(psi.norm() - 1.0) > 1e-8)
    throw std::invalid_argument(std::string(what) + " must be normalized");
}

void check_density_matrix(const Eigen::MatrixXcd& rho) {
  if (rho.rows() != rho.cols() || rho.rows() == 0)
    throw std::invalid_argument("density matrix must be square");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("density matrix must be Hermitian");
  if (std::abs(rho.trace().real() - 1.0) > 1e-6 ||
      std::abs(rho.trace().imag()) > 1e-8)
    throw std::invalid_argument("density matrix must have unit trace");
}

}  // namespace

SpectralDecomposition diagonalize(const Eigen::MatrixXcd& hamiltonian) {
  if (hamiltonian.rows() != hamiltonian.cols() || hamiltonian.rows() == 0)
    throw std::invalid_argument("hamiltonian must be a non-empty square matrix");
  const double scale = hamiltonian.cwiseAbs().maxCoeff();
  const double defect = (hamiltonian - hamiltonian.adjoint()).cwiseAbs().maxCoeff();
  if (defect > 1e-10 * std::max(1.0, scale))
    throw std::invalid_argument("hamiltonian is not Hermitian (defect " +
                                std::to_string(defect) + ")");

  SpectralDecomposition spec;
  const int n = static_cast<int>(hamiltonian.rows());
  spec.eigenvalues.resize(n);
  spec.eigenvectors = hamiltonian;
  const int info =
      LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n, spec.eigenvectors.data(), n,
                     spec.eigenvalues.data());
  if (info != 0)
    throw NumericError("zheevd failed to converge: info = " +
                       std::to_string(info) + ", dim = " + std::to_string(n) +
                       ", max|H| = " + std::to_string(scale) +
                       ", hermiticity defect = " + std::to_string(defect));
  return spec;
}

Propagator::Propagator(const SpectralDecomposition& spec,
                       const Eigen::VectorXcd& psi0)
    : spec_(&spec) {
  if (psi0.size() != spec.eigenvectors.rows())
    throw std::invalid_argument("state dimension does not match the spectrum");
  check_normalized(psi0, "initial state");
  coeffs_ = spec.eigenvectors.adjoint() * psi0;
}

Eigen::VectorXcd Propagator::state_at(double t) const {
  const Eigen::ArrayXcd phases =
      (Complex(0.0, -t) * spec_->eigenvalues.array().cast<Complex>()).exp();
  return spec_->eigenvectors * (phases * coeffs_.array()).matrix();
}

Eigen::VectorXcd evolve(const SpectralDecomposition& spec,
                        const Eigen::VectorXcd& psi0, double t) {
  return Propagator(spec, psi0).state_at(t);
}

Eigen::MatrixXcd reduced_density_atom(const Eigen::VectorXcd& psi,
                                      const BasisDescriptor& basis) {
  if (psi.size() != basis.dim_total)
    throw std::invalid_argument("state dimension does not match the basis");
  check_normalized(psi, "state");
  Eigen::Map<const Eigen::MatrixXcd> m(psi.data(), basis.dim_field,
                                       basis.dim_spin);
  Eigen::MatrixXcd rho = m.transpose() * m.conjugate();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return rho;
}

Eigen::MatrixXcd reduced_density_field(const Eigen::VectorXcd& psi,
                                       const BasisDescriptor& basis) {
  if (psi.size() != basis.dim_total)
    throw std::invalid_argument("state dimension does not match the basis");
  check_normalized(psi, "state");
  Eigen::Map<const Eigen::MatrixXcd> m(psi.data(), basis.dim_field,
                                       basis.dim_spin);
  Eigen::MatrixXcd rho = m * m.adjoint();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return rho;
}

double linear_entropy(const Eigen::MatrixXcd& rho) {
  check_density_matrix(rho);
  return 1.0 - rho.squaredNorm();
}

double expect_jz(const Eigen::MatrixXcd& rho_atom, double J) {
  check_density_matrix(rho_atom);
  const int two_j = static_cast<int>(std::lround(2.0 * J));
  if (rho_atom.rows() != two_j + 1)
    throw std::invalid_argument("density matrix dimension does not match J");
  double value = 0.0;
  for (int s = 0; s <= two_j; ++s)
    value += (static_cast<double>(s) - J) * rho_atom(s, s).real();
  return value;
}

TimeSeries entropy_rate(const TimeSeries& delta) {
  if (delta.size() < 3)
    throw std::invalid_argument("entropy rate needs at least 3 samples");
  if (!(delta.dt > 0.0) || delta.dt > 0.02 + 1e-12)
    throw std::invalid_argument("entropy rate needs grid spacing in (0, 0.02]");
  TimeSeries rate;
  rate.t0 = delta.t0;
  rate.dt = delta.dt;
  const std::size_t n = delta.size();
  rate.values.resize(n);
  const auto& v = delta.values;
  rate.values[0] = (v[1] - v[0]) / delta.dt;
  for (std::size_t k = 1; k + 1 < n; ++k)
    rate.values[k] = (v[k + 1] - v[k - 1]) / (2.0 * delta.dt);
  rate.values[n - 1] = (v[n - 1] - v[n - 2]) / delta.dt;
  return rate;
}

ObservableBundle observable_run(const SpectralDecomposition& spec,
                                const Eigen::VectorXcd& psi0,
                                const BasisDescriptor& basis, double t_max,
                                double dt, int threads) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(t_max > dt)) throw std::invalid_argument("t_max must exceed dt");
  const auto n_steps = static_cast<std::size_t>(std::llround(t_max / dt));

  Propagator prop(spec, psi0);
  ObservableBundle bundle;
  bundle.delta.dt = bundle.jz_over_j.dt = dt;
  bundle.delta.values.resize(n_steps + 1);
  bundle.jz_over_j.values.resize(n_steps + 1);

  const double delta_cap = 1.0 - 1.0 / basis.dim_spin;
  parallel_for(n_steps + 1, threads, [&](std::size_t k) {
    const Eigen::VectorXcd psi = prop.state_at(static_cast<double>(k) * dt);
    const Eigen::MatrixXcd rho = reduced_density_atom(psi, basis);
    bundle.delta.values[k] = linear_entropy(rho);
    bundle.jz_over_j.values[k] = expect_jz(rho, basis.J) / basis.J;
  });

  for (std::size_t k = 0; k <= n_steps; ++k) {
    const double d = bundle.delta.values[k];
    const double jz = bundle.jz_over_j.values[k];
    if (d < -1e-9 || d > delta_cap + 1e-9 || std::abs(jz) > 1.0 + 1e-9)
      throw NumericError("observable out of bounds at t = " +
                         std::to_string(static_cast<double>(k) * dt) +
                         " (delta = " + std::to_string(d) +
                         ", jz/J = " + std::to_string(jz) + ")");
  }
  bundle.delta_rate = entropy_rate(bundle.delta);
  return bundle;
}

HusimiGrid spin_husimi(const Eigen::MatrixXcd& rho_atom, int resolution) {
  if (resolution < 11)
    throw std::invalid_argument("husimi resolution must be at least 11");
  check_density_matrix(rho_atom);
  const int two_j = static_cast<int>(rho_atom.rows()) - 1;
  const double J = 0.5 * two_j;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho_atom);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw NumericError("density matrix is not positive semidefinite (min "
                       "eigenvalue " +
                       std::to_string(es.eigenvalues().minCoeff()) + ")");
  const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXcd rho_psd = es.eigenvectors() *
                                   clipped.asDiagonal() *
                                   es.eigenvectors().adjoint();

  HusimiGrid grid;
  grid.J = J;
  const double border = 2.0 * std::sqrt(J);
  grid.q_axis.resize(resolution);
  grid.p_axis.resize(resolution);
  for (int i = 0; i < resolution; ++i) {
    const double x = -border + 2.0 * border * i / (resolution - 1);
    grid.q_axis[i] = x;
    grid.p_axis[i] = x;
  }
  grid.values.setConstant(resolution, resolution,
                          std::numeric_limits<double>::quiet_NaN());
  grid.mask.setConstant(resolution, resolution, false);

  const double r2_cap = 4.0 * J * (1.0 - kBorderMargin);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const double q = grid.q_axis[i];
      const double p = grid.p_axis[j];
      if (q * q + p * p > r2_cap) continue;
      const Eigen::VectorXcd w = spin_coherent_state(q, p, J);
      double value = (w.adjoint() * rho_psd * w)(0).real();
      if (value < -1e-9 || value > 1.0 + 1e-9)
        throw NumericError("husimi value out of [0, 1] at (q_a, p_a) = (" +
                           std::to_string(q) + ", " + std::to_string(p) + ")");
      value = std::min(1.0, std::max(0.0, value));
      grid.values(i, j) = value;
      grid.mask(i, j) = true;
    }
  }
  return grid;
}

double husimi_participation(const HusimiGrid& grid) {
  double s1 = 0.0, s2 = 0.0;
  std::size_t cells = 0;
  for (int i = 0; i < grid.values.rows(); ++i) {
    for (int j = 0; j < grid.values.cols(); ++j) {
      if (!grid.mask(i, j)) continue;
      const double q = grid.values(i, j);
      s1 += q;
      s2 += q * q;
      ++cells;
    }
  }
  if (cells == 0) throw std::invalid_argument("husimi grid has no in-disk cells");
  if (s2 == 0.0) throw std::invalid_argument("husimi grid is identically zero");
  return s1 * s1 / (static_cast<double>(cells) * s2);
}

double husimi_norm_integral(const HusimiGrid& grid) {
  if (grid.q_axis.size() < 2)
    throw std::invalid_argument("husimi grid is degenerate");
  const double dq = grid.q_axis[1] - grid.q_axis[0];
  const double dp = grid.p_axis[1] - grid.p_axis[0];
  double sum = 0.0;
  for (int i = 0; i < grid.values.rows(); ++i)
    for (int j = 0; j < grid.values.cols(); ++j)
      if (grid.mask(i, j)) sum += grid.values(i, j);
  const double two_j = 2.0 * grid.J;
  return sum * dq * dp / (2.0 * M_PI) * (two_j + 1.0) / two_j;
}

}  // namespace jcm
