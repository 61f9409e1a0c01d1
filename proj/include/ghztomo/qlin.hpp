// qlin.hpp
// Small dense complex linear algebra for multi-qubit polarization states.
//
// Conventions used throughout the library:
//   * qubit 0 is the most significant bit of a basis index (big-endian);
//     for the three-photon states that is photon A, then B, then mode 1.
//   * H is the computational |0>, V is |1>.

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ghztomo/error.hpp"

namespace ghztomo {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr bool kBigEndianQubits = true;

inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kTraceTolerance = 1e-10;
inline constexpr double kPsdFloor = -1e-9;

// Number of qubits for a dimension that must be a power of two; throws otherwise.
int qubits_for_dimension(std::size_t dimension);

class PureState {
 public:
  // Amplitudes must already have unit norm.
  explicit PureState(Vector amplitudes);

  // Scales the amplitudes to unit norm; a zero vector is rejected.
  static PureState normalized(Vector amplitudes);

  // Computational basis state from a string of 'H'/'V' or '0'/'1'.
  static PureState basis(std::string_view labels);

  const Vector& amplitudes() const { return amplitudes_; }
  int qubit_count() const { return qubits_; }
  std::size_t dimension() const { return static_cast<std::size_t>(amplitudes_.size()); }

 private:
  Vector amplitudes_;
  int qubits_ = 0;
};

class HermitianOperator {
 public:
  explicit HermitianOperator(Matrix entries);

  const Matrix& entries() const { return entries_; }
  int qubit_count() const { return qubits_; }
  std::size_t dimension() const { return static_cast<std::size_t>(entries_.rows()); }

  static HermitianOperator identity(int qubits);
  static HermitianOperator projector(const PureState& psi);

 private:
  Matrix entries_;
  int qubits_ = 0;
};

class DensityMatrix {
 public:
  // Validates Hermiticity, unit trace and positivity (eigenvalues >= kPsdFloor).
  explicit DensityMatrix(Matrix entries);

  static DensityMatrix from_pure(const PureState& psi);
  static DensityMatrix maximally_mixed(int qubits);
  // p * a + (1 - p) * b
  static DensityMatrix mixture(double p, const DensityMatrix& a, const DensityMatrix& b);

  // Explicit repair of a nearly physical matrix: Hermitian part, negative
  // eigenvalues clamped to zero, trace renormalized. Only call sites that
  // expect unphysical input should use this.
  static DensityMatrix sanitize(const Matrix& entries);

  const Matrix& entries() const { return entries_; }
  int qubit_count() const { return qubits_; }
  std::size_t dimension() const { return static_cast<std::size_t>(entries_.rows()); }

 private:
  struct Unchecked {};
  DensityMatrix(Matrix entries, Unchecked);

  Matrix entries_;
  int qubits_ = 0;
};

// Three Euler angles per qubit, each block Rz(alpha) * Ry(beta) * Rz(gamma).
class LocalUnitary {
 public:
  explicit LocalUnitary(int qubits);
  LocalUnitary(int qubits, std::span<const double> angles);

  int qubit_count() const { return qubits_; }
  const std::vector<double>& angles() const { return angles_; }

  Eigen::Matrix2cd block(int qubit) const;
  Matrix matrix() const;

 private:
  int qubits_ = 0;
  std::vector<double> angles_;
};

Eigen::Matrix2cd euler_unitary(double alpha, double beta, double gamma);

namespace pauli {
Eigen::Matrix2cd identity();
Eigen::Matrix2cd x();
Eigen::Matrix2cd y();
Eigen::Matrix2cd z();
}  // namespace pauli

// Named single- and multi-photon polarization states.
namespace states {
PureState h();
PureState v();
PureState d();  // (H + V)/sqrt2
PureState a();  // (H - V)/sqrt2
PureState r();  // (H - iV)/sqrt2
PureState phi_plus();
PureState ghz(int qubits = 3);
}  // namespace states

Matrix kron(const Matrix& a, const Matrix& b);

PureState tensor_product(const PureState& a, const PureState& b);
DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b);
HermitianOperator tensor_product(const HermitianOperator& a, const HermitianOperator& b);

// Keeps the listed qubits (in ascending index order) and traces out the rest.
DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep);
Matrix partial_trace(const Matrix& rho, int qubits, std::span<const int> keep);

struct ProjectionOutcome {
  PureState state;
  double probability = 0.0;
};

// Projects one qubit onto a single-qubit state and removes it from the register.
ProjectionOutcome project_qubit(const PureState& psi, int qubit, const PureState& onto);

// Reorders the tensor factors: output qubit k is input qubit order[k].
PureState permute_qubits(const PureState& psi, std::span<const int> order);

double fidelity_pure(const DensityMatrix& rho, const PureState& psi);
double expectation(const DensityMatrix& rho, const HermitianOperator& obs);

struct EigenSystem {
  Eigen::VectorXd values;  // descending
  Matrix vectors;          // columns, matching values
};

EigenSystem eigendecompose(const HermitianOperator& h);
EigenSystem eigendecompose(const Matrix& h);

double trace_distance(const Matrix& a, const Matrix& b);
double max_abs_difference(const Matrix& a, const Matrix& b);

}  // namespace ghztomo
