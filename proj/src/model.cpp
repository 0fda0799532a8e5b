#include "jcm/model.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace jcm {

namespace {

int checked_two_j(double J) {
  if (!(J > 0.0)) throw std::invalid_argument("spin magnitude J must be positive");
  const double two_j = 2.0 * J;
  const double rounded = std::round(two_j);
  if (std::abs(two_j - rounded) > 1e-9 || rounded < 1.0)
    throw std::invalid_argument("2J must be a positive integer, got J = " +
                                std::to_string(J));
  return static_cast<int>(rounded);
}

}  // namespace

void ModelParams::validate() const {
  checked_two_j(J);
  if (!(omega0 > 0.0)) throw std::invalid_argument("omega0 must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (G < 0.0 || Gprime < 0.0)
    throw std::invalid_argument("couplings G, Gprime must be non-negative");
}

int ModelParams::two_j() const { return checked_two_j(J); }

int BasisDescriptor::flat_index(int spin_idx, int fock_idx) const {
  if (spin_idx < 0 || spin_idx >= dim_spin || fock_idx < 0 || fock_idx >= dim_field)
    throw std::out_of_range("basis index out of range");
  return spin_idx * dim_field + fock_idx;
}

std::pair<int, int> BasisDescriptor::unflatten(int flat_idx) const {
  if (flat_idx < 0 || flat_idx >= dim_total)
    throw std::out_of_range("basis index out of range");
  return {flat_idx / dim_field, flat_idx % dim_field};
}

BasisDescriptor build_basis(const ModelParams& params, int n_max) {
  params.validate();
  if (n_max < 0) throw std::invalid_argument("n_max must be non-negative");
  BasisDescriptor basis;
  basis.J = params.J;
  basis.n_max = n_max;
  basis.dim_spin = checked_two_j(params.J) + 1;
  basis.dim_field = n_max + 1;
  basis.dim_total = basis.dim_spin * basis.dim_field;
  return basis;
}

OperatorSet build_operators(const BasisDescriptor& basis) {
  const int ds = basis.dim_spin;
  const int df = basis.dim_field;
  const int dim = basis.dim_total;
  const double J = basis.J;

  using Triplet = Eigen::Triplet<Complex>;
  std::vector<Triplet> ta, tdag, tjp, tjm, tjz;
  ta.reserve(static_cast<std::size_t>(ds) * basis.n_max);
  tdag.reserve(ta.capacity());
  tjp.reserve(static_cast<std::size_t>(ds - 1) * df);
  tjm.reserve(tjp.capacity());
  tjz.reserve(dim);

  for (int s = 0; s < ds; ++s) {
    const double m = s - J;
    const double jp_coef = std::sqrt(J * (J + 1.0) - m * (m + 1.0));
    for (int n = 0; n < df; ++n) {
      const int idx = s * df + n;
      tjz.emplace_back(idx, idx, Complex(m, 0.0));
      if (n >= 1) {
        // a |n> = sqrt(n) |n-1>
        const double root_n = std::sqrt(static_cast<double>(n));
        ta.emplace_back(idx - 1, idx, Complex(root_n, 0.0));
        tdag.emplace_back(idx, idx - 1, Complex(root_n, 0.0));
      }
      if (s + 1 < ds) {
        // J+ |m> = sqrt(J(J+1) - m(m+1)) |m+1>
        tjp.emplace_back(idx + df, idx, Complex(jp_coef, 0.0));
        tjm.emplace_back(idx, idx + df, Complex(jp_coef, 0.0));
      }
    }
  }

  OperatorSet ops;
  ops.basis = basis;
  auto fill = [dim](std::vector<Triplet>& trip) {
    SparseMatrixC mat(dim, dim);
    mat.setFromTriplets(trip.begin(), trip.end());
    mat.makeCompressed();
    return mat;
  };
  ops.a = fill(ta);
  ops.a_dag = fill(tdag);
  ops.jp = fill(tjp);
  ops.jm = fill(tjm);
  ops.jz = fill(tjz);
  return ops;
}

Eigen::MatrixXcd build_hamiltonian(const ModelParams& params,
                                   const OperatorSet& ops) {
  params.validate();
  if (std::abs(ops.basis.J - params.J) > 1e-12 ||
      ops.a.rows() != ops.basis.dim_total)
    throw std::invalid_argument(
        "operator set dimensions do not match the model parameters");

  const double scale = 1.0 / std::sqrt(2.0 * params.J);
  SparseMatrixC h = params.omega0 * (ops.a_dag * ops.a).eval();
  h += params.epsilon * ops.jz;
  if (params.G != 0.0)
    h += (params.G * scale) * (ops.a * ops.jp + ops.a_dag * ops.jm).eval();
  if (params.Gprime != 0.0)
    h += (params.Gprime * scale) * (ops.a_dag * ops.jp + ops.a * ops.jm).eval();
  return Eigen::MatrixXcd(h);
}

Eigen::VectorXcd spin_coherent_state(double q_a, double p_a, double J) {
  const int two_j = checked_two_j(J);
  const double r2 = q_a * q_a + p_a * p_a;
  const double four_j = 4.0 * J;
  if (r2 >= four_j * (1.0 - kBorderMargin))
    throw std::invalid_argument(
        "spin coherent-state label violates q_a^2 + p_a^2 < 4J");

  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(two_j + 1);
  if (r2 == 0.0) {
    c(0) = 1.0;  // w = 0 is |J, -J>
    return c;
  }
  const double w_mag2 = r2 / (four_j - r2);
  const double log_w = 0.5 * std::log(w_mag2);
  const double w_arg = std::atan2(q_a, p_a);  // w = (p_a + i q_a)/sqrt(4J - r^2)
  const double log_norm = -J * std::log1p(w_mag2);
  const double lg_two_j = std::lgamma(two_j + 1.0);
  for (int k = 0; k <= two_j; ++k) {
    const double log_binom =
        0.5 * (lg_two_j - std::lgamma(k + 1.0) - std::lgamma(two_j - k + 1.0));
    const double log_mag = log_norm + log_binom + k * log_w;
    c(k) = std::polar(std::exp(log_mag), k * w_arg);
  }
  c /= c.norm();
  return c;
}

FieldCoherentState field_coherent_state(double q_f, double p_f, int n_max) {
  if (n_max < 0) throw std::invalid_argument("n_max must be non-negative");
  const double v_mag2 = 0.5 * (q_f * q_f + p_f * p_f);  // v = (p_f + i q_f)/sqrt(2)

  FieldCoherentState state;
  state.amplitudes = Eigen::VectorXcd::Zero(n_max + 1);
  if (v_mag2 == 0.0) {
    state.amplitudes(0) = 1.0;
    state.tail_mass = 0.0;
    return state;
  }
  const double log_v = 0.5 * std::log(v_mag2);
  const double v_arg = std::atan2(q_f, p_f);
  double mass = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    const double log_mag = -0.5 * v_mag2 + n * log_v - 0.5 * std::lgamma(n + 1.0);
    state.amplitudes(n) = std::polar(std::exp(log_mag), n * v_arg);
    mass += std::exp(2.0 * log_mag);
  }
  state.tail_mass = std::max(0.0, 1.0 - mass);
  if (state.tail_mass > 1e-10)
    throw TruncationError(
        "field coherent state does not fit below the Fock cutoff: tail mass " +
        std::to_string(state.tail_mass) + " at n_max = " + std::to_string(n_max) +
        ", mean occupation " + std::to_string(v_mag2));
  state.amplitudes /= std::sqrt(mass);
  return state;
}

Eigen::VectorXcd product_initial_state(const PhasePoint& point,
                                       const BasisDescriptor& basis) {
  const Eigen::VectorXcd spin = spin_coherent_state(point.q_a, point.p_a, basis.J);
  const FieldCoherentState field =
      field_coherent_state(point.q_f, point.p_f, basis.n_max);

  Eigen::VectorXcd psi(basis.dim_total);
  for (int s = 0; s < basis.dim_spin; ++s)
    psi.segment(s * basis.dim_field, basis.dim_field) =
        spin(s) * field.amplitudes;
  psi /= psi.norm();
  return psi;
}

}  // namespace jcm
