#pragma once

#include <Eigen/Dense>

#include "jcm/model.hpp"
#include "jcm/timeseries.hpp"

namespace jcm {

struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;    // ascending
  Eigen::MatrixXcd eigenvectors;  // columns, unitary
};

// Dense Hermitian eigendecomposition (LAPACK zheevd). Throws NumericError
// with matrix diagnostics if the solver does not converge.
SpectralDecomposition diagonalize(const Eigen::MatrixXcd& hamiltonian);

// psi(t) = V exp(-i lambda t) V^dag psi(0). The projection onto the eigenbasis
// is computed once; state_at is const and safe to call from many threads.
class Propagator {
 public:
  Propagator(const SpectralDecomposition& spec, const Eigen::VectorXcd& psi0);
  Eigen::VectorXcd state_at(double t) const;

 private:
  const SpectralDecomposition* spec_;
  Eigen::VectorXcd coeffs_;
};

Eigen::VectorXcd evolve(const SpectralDecomposition& spec,
                        const Eigen::VectorXcd& psi0, double t);

// (rho_a)_{m m'} = sum_n psi(m, n) conj(psi(m', n)); Hermitian, unit trace.
Eigen::MatrixXcd reduced_density_atom(const Eigen::VectorXcd& psi,
                                      const BasisDescriptor& basis);
Eigen::MatrixXcd reduced_density_field(const Eigen::VectorXcd& psi,
                                       const BasisDescriptor& basis);

// delta = 1 - sum_{ij} |rho_ij|^2, in [0, 1 - 1/dim].
double linear_entropy(const Eigen::MatrixXcd& rho);

double expect_jz(const Eigen::MatrixXcd& rho_atom, double J);

// Central finite differences in the interior, one-sided at the ends.
// Requires at least 3 samples and grid spacing <= 0.02.
TimeSeries entropy_rate(const TimeSeries& delta);

struct ObservableBundle {
  TimeSeries delta;      // linear entropy of the atomic reduction
  TimeSeries delta_rate;
  TimeSeries jz_over_j;
};

ObservableBundle observable_run(const SpectralDecomposition& spec,
                                const Eigen::VectorXcd& psi0,
                                const BasisDescriptor& basis, double t_max,
                                double dt, int threads = 1);

// Q(q_a, p_a) = <w(q_a, p_a)| rho_a |w(q_a, p_a)> on a uniform Cartesian grid
// spanning the disk; cells outside the disk hold NaN and are masked out.
struct HusimiGrid {
  double J = 0.0;
  std::vector<double> q_axis, p_axis;
  Eigen::MatrixXd values;  // values(i, j) = Q(q_axis[i], p_axis[j])
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
};

// rho_atom eigenvalues below -1e-10 are an error; small negatives are clipped
// to zero before evaluating Q.
HusimiGrid spin_husimi(const Eigen::MatrixXcd& rho_atom, int resolution);

// (sum Q)^2 / (N sum Q^2) over in-disk cells: 1 for a uniform grid, 1/N for a
// single occupied cell.
double husimi_participation(const HusimiGrid& grid);

// In-disk sum of Q against (2J+1)/(2J) dq dp / (2 pi); reproduces tr(rho) in
// the continuum limit, since the flat area element in these coordinates
// already carries the SU(2) coherent-state measure.
double husimi_norm_integral(const HusimiGrid& grid);

}  // namespace jcm
