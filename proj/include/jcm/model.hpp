#pragma once

#include <complex>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "jcm/errors.hpp"

namespace jcm {

using Complex = std::complex<double>;
using SparseMatrixC = Eigen::SparseMatrix<Complex>;

// Coherent-state labels within 4J*(1 - kBorderMargin) of the disk border are
// rejected: the stereographic label diverges at the border itself.
inline constexpr double kBorderMargin = 1e-12;

// Physical constants of the model (hbar = 1). N = 2J two-level atoms coupled
// to one bosonic mode through a rotating (G) and a counter-rotating (Gprime)
// term, both scaled by 1/sqrt(2J).
struct ModelParams {
  double J = 4.5;
  double omega0 = 1.0;   // field frequency
  double epsilon = 1.0;  // atomic level splitting
  double G = 0.5;
  double Gprime = 0.0;

  void validate() const;  // throws std::invalid_argument
  int two_j() const;
  double g_plus() const { return G + Gprime; }
  double g_minus() const { return G - Gprime; }
};

// Classical coordinates; the atomic pair lives in the disk q_a^2 + p_a^2 <= 4J.
struct PhasePoint {
  double q_a = 0.0;
  double p_a = 0.0;
  double q_f = 0.0;
  double p_f = 0.0;

  double spin_radius2() const { return q_a * q_a + p_a * p_a; }
};

// Flat |m, n> product basis, m = -J..J, n = 0..n_max. The field index runs
// fastest so the atomic partial trace is a contiguous reshape.
struct BasisDescriptor {
  double J = 0.0;
  int n_max = 0;
  int dim_spin = 0;
  int dim_field = 0;
  int dim_total = 0;

  int flat_index(int spin_idx, int fock_idx) const;   // spin_idx = J + m
  std::pair<int, int> unflatten(int flat_idx) const;  // -> (spin_idx, fock_idx)
};

BasisDescriptor build_basis(const ModelParams& params, int n_max);

// Ladder and collective-spin operators embedded in the product basis.
// The spin commutators are exact; [a, a+] = 1 holds on every Fock level
// except n = n_max, where the truncated a+ gives [a, a+] = -n_max.
struct OperatorSet {
  BasisDescriptor basis;
  SparseMatrixC a, a_dag, jp, jm, jz;
};

OperatorSet build_operators(const BasisDescriptor& basis);

// H = omega0 a+a + epsilon Jz + (G/sqrt(2J)) (a J+ + a+ J-)
//                             + (Gprime/sqrt(2J)) (a+ J+ + a J-).
Eigen::MatrixXcd build_hamiltonian(const ModelParams& params,
                                   const OperatorSet& ops);

// Normalized SU(2) coherent state |w>, w = (p_a + i q_a)/sqrt(4J - r^2),
// expanded over m = -J..J. Amplitudes are assembled in log space so large J
// and near-border labels stay finite.
Eigen::VectorXcd spin_coherent_state(double q_a, double p_a, double J);

struct FieldCoherentState {
  Eigen::VectorXcd amplitudes;  // renormalized on the truncated Fock space
  double tail_mass = 0.0;       // weight beyond n_max before renormalization
};

// Bosonic coherent state |v>, v = (p_f + i q_f)/sqrt(2), truncated at n_max.
// Throws TruncationError when the tail mass exceeds 1e-10.
FieldCoherentState field_coherent_state(double q_f, double p_f, int n_max);

Eigen::VectorXcd product_initial_state(const PhasePoint& point,
                                       const BasisDescriptor& basis);

}  // namespace jcm
