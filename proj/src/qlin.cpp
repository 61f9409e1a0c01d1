#include "ghztomo/qlin.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

namespace ghztomo {

namespace {

constexpr Complex kI{0.0, 1.0};

int bit_of(std::size_t index, int qubit, int qubits) {
  return static_cast<int>((index >> (qubits - 1 - qubit)) & 1U);
}

void require_same_dimension(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw TomoError(ErrorCode::DimensionMismatch,
                    std::string(what) + ": dimension " + std::to_string(a) + " vs " +
                        std::to_string(b));
  }
}

double hermitian_defect(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

std::vector<int> validated_keep(std::span<const int> keep, int qubits) {
  if (keep.empty()) {
    throw TomoError(ErrorCode::InvalidArgument, "partial_trace: keep set is empty");
  }
  std::vector<int> sorted(keep.begin(), keep.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw TomoError(ErrorCode::InvalidArgument, "partial_trace: duplicate qubit index");
  }
  if (sorted.front() < 0 || sorted.back() >= qubits) {
    throw TomoError(ErrorCode::InvalidArgument, "partial_trace: qubit index out of range");
  }
  return sorted;
}

}  // namespace

int qubits_for_dimension(std::size_t dimension) {
  if (dimension == 0 || !std::has_single_bit(dimension)) {
    throw TomoError(ErrorCode::DimensionMismatch,
                    "dimension " + std::to_string(dimension) + " is not a power of two");
  }
  return std::countr_zero(dimension);
}

// ---------------------------------------------------------------- PureState

PureState::PureState(Vector amplitudes) : amplitudes_(std::move(amplitudes)) {
  qubits_ = qubits_for_dimension(static_cast<std::size_t>(amplitudes_.size()));
  if (std::abs(amplitudes_.norm() - 1.0) > kNormTolerance) {
    throw TomoError(ErrorCode::InvalidArgument, "PureState: amplitudes are not normalized");
  }
}

PureState PureState::normalized(Vector amplitudes) {
  const double n = amplitudes.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw TomoError(ErrorCode::InvalidArgument, "PureState: cannot normalize a zero vector");
  }
  return PureState(amplitudes / n);
}

PureState PureState::basis(std::string_view labels) {
  if (labels.empty()) {
    throw TomoError(ErrorCode::InvalidArgument, "PureState::basis: empty label");
  }
  std::size_t index = 0;
  for (char c : labels) {
    index <<= 1U;
    if (c == 'V' || c == '1') {
      index |= 1U;
    } else if (c != 'H' && c != '0') {
      throw TomoError(ErrorCode::InvalidArgument,
                      std::string("PureState::basis: bad label '") + c + "'");
    }
  }
  Vector amps = Vector::Zero(static_cast<Eigen::Index>(std::size_t{1} << labels.size()));
  amps(static_cast<Eigen::Index>(index)) = 1.0;
  return PureState(std::move(amps));
}

// -------------------------------------------------------- HermitianOperator

HermitianOperator::HermitianOperator(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols()) {
    throw TomoError(ErrorCode::DimensionMismatch, "HermitianOperator: matrix is not square");
  }
  qubits_ = qubits_for_dimension(static_cast<std::size_t>(entries_.rows()));
  if (hermitian_defect(entries_) > kHermitianTolerance) {
    throw TomoError(ErrorCode::NotHermitian, "HermitianOperator: matrix is not Hermitian");
  }
}

HermitianOperator HermitianOperator::identity(int qubits) {
  const auto d = Eigen::Index{1} << qubits;
  return HermitianOperator(Matrix::Identity(d, d));
}

HermitianOperator HermitianOperator::projector(const PureState& psi) {
  const Vector& v = psi.amplitudes();
  return HermitianOperator(v * v.adjoint());
}

// ------------------------------------------------------------ DensityMatrix

DensityMatrix::DensityMatrix(Matrix entries, Unchecked) : entries_(std::move(entries)) {
  qubits_ = qubits_for_dimension(static_cast<std::size_t>(entries_.rows()));
}

DensityMatrix::DensityMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols()) {
    throw TomoError(ErrorCode::DimensionMismatch, "DensityMatrix: matrix is not square");
  }
  qubits_ = qubits_for_dimension(static_cast<std::size_t>(entries_.rows()));
  if (hermitian_defect(entries_) > kHermitianTolerance) {
    throw TomoError(ErrorCode::NotHermitian, "DensityMatrix: matrix is not Hermitian");
  }
  if (std::abs(entries_.trace() - Complex{1.0, 0.0}) > kTraceTolerance) {
    throw TomoError(ErrorCode::NotPhysical, "DensityMatrix: trace is not 1");
  }
  const Matrix hermitian = 0.5 * (entries_ + entries_.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().minCoeff() < kPsdFloor) {
    throw TomoError(ErrorCode::NotPhysical,
                    "DensityMatrix: negative eigenvalue " +
                        std::to_string(solver.eigenvalues().minCoeff()));
  }
}

DensityMatrix DensityMatrix::from_pure(const PureState& psi) {
  const Vector& v = psi.amplitudes();
  Matrix m = v * v.adjoint();
  return DensityMatrix(0.5 * (m + m.adjoint()), Unchecked{});
}

DensityMatrix DensityMatrix::maximally_mixed(int qubits) {
  const auto d = Eigen::Index{1} << qubits;
  return DensityMatrix(Matrix::Identity(d, d) / static_cast<double>(d), Unchecked{});
}

DensityMatrix DensityMatrix::mixture(double p, const DensityMatrix& a, const DensityMatrix& b) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw TomoError(ErrorCode::InvalidArgument, "mixture: weight outside [0,1]");
  }
  require_same_dimension(a.dimension(), b.dimension(), "mixture");
  return DensityMatrix(p * a.entries_ + (1.0 - p) * b.entries_, Unchecked{});
}

DensityMatrix DensityMatrix::sanitize(const Matrix& entries) {
  if (entries.rows() != entries.cols()) {
    throw TomoError(ErrorCode::DimensionMismatch, "sanitize: matrix is not square");
  }
  const Matrix hermitian = 0.5 * (entries + entries.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian);
  Eigen::VectorXd values = solver.eigenvalues().cwiseMax(0.0);
  const double total = values.sum();
  if (!(total > 0.0)) {
    throw TomoError(ErrorCode::NotPhysical, "sanitize: no positive spectral weight");
  }
  values /= total;
  const Matrix& vecs = solver.eigenvectors();
  Matrix repaired = vecs * values.cast<Complex>().asDiagonal() * vecs.adjoint();
  return DensityMatrix(0.5 * (repaired + repaired.adjoint()), Unchecked{});
}

// ------------------------------------------------------------- LocalUnitary

Eigen::Matrix2cd euler_unitary(double alpha, double beta, double gamma) {
  auto rz = [](double t) {
    Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
    m(0, 0) = std::exp(-kI * (t / 2.0));
    m(1, 1) = std::exp(kI * (t / 2.0));
    return m;
  };
  Eigen::Matrix2cd ry;
  ry << std::cos(beta / 2.0), -std::sin(beta / 2.0), std::sin(beta / 2.0), std::cos(beta / 2.0);
  return rz(alpha) * ry * rz(gamma);
}

LocalUnitary::LocalUnitary(int qubits)
    : qubits_(qubits), angles_(static_cast<std::size_t>(3 * qubits), 0.0) {
  if (qubits <= 0) throw TomoError(ErrorCode::InvalidArgument, "LocalUnitary: no qubits");
}

LocalUnitary::LocalUnitary(int qubits, std::span<const double> angles)
    : qubits_(qubits), angles_(angles.begin(), angles.end()) {
  if (qubits <= 0 || angles_.size() != static_cast<std::size_t>(3 * qubits)) {
    throw TomoError(ErrorCode::InvalidArgument, "LocalUnitary: need 3 angles per qubit");
  }
}

Eigen::Matrix2cd LocalUnitary::block(int qubit) const {
  const auto k = static_cast<std::size_t>(3 * qubit);
  return euler_unitary(angles_[k], angles_[k + 1], angles_[k + 2]);
}

Matrix LocalUnitary::matrix() const {
  Matrix u = block(0);
  for (int q = 1; q < qubits_; ++q) u = kron(u, block(q));
  return u;
}

// -------------------------------------------------------------------- pauli

namespace pauli {
Eigen::Matrix2cd identity() { return Eigen::Matrix2cd::Identity(); }
Eigen::Matrix2cd x() {
  Eigen::Matrix2cd m;
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}
Eigen::Matrix2cd y() {
  Eigen::Matrix2cd m;
  m << 0.0, -kI, kI, 0.0;
  return m;
}
Eigen::Matrix2cd z() {
  Eigen::Matrix2cd m;
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}
}  // namespace pauli

// ------------------------------------------------------------------- states

namespace states {
namespace {
PureState qubit(Complex h_amp, Complex v_amp) {
  Vector amps(2);
  amps << h_amp, v_amp;
  return PureState::normalized(std::move(amps));
}
}  // namespace

PureState h() { return qubit(1.0, 0.0); }
PureState v() { return qubit(0.0, 1.0); }
PureState d() { return qubit(1.0, 1.0); }
PureState a() { return qubit(1.0, -1.0); }
PureState r() { return qubit(1.0, -kI); }

PureState phi_plus() { return ghz(2); }

PureState ghz(int qubits) {
  if (qubits < 1) throw TomoError(ErrorCode::InvalidArgument, "ghz: need at least one qubit");
  const auto d = Eigen::Index{1} << qubits;
  Vector amps = Vector::Zero(d);
  amps(0) = 1.0;
  amps(d - 1) = 1.0;
  return PureState::normalized(std::move(amps));
}
}  // namespace states

// ------------------------------------------------------------------ tensors

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

PureState tensor_product(const PureState& a, const PureState& b) {
  return PureState::normalized(kron(a.amplitudes(), b.amplitudes()));
}

DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b) {
  return DensityMatrix(kron(a.entries(), b.entries()));
}

HermitianOperator tensor_product(const HermitianOperator& a, const HermitianOperator& b) {
  return HermitianOperator(kron(a.entries(), b.entries()));
}

Matrix partial_trace(const Matrix& rho, int qubits, std::span<const int> keep_in) {
  const std::vector<int> keep = validated_keep(keep_in, qubits);
  std::vector<int> traced;
  for (int q = 0; q < qubits; ++q) {
    if (!std::binary_search(keep.begin(), keep.end(), q)) traced.push_back(q);
  }
  const int kept = static_cast<int>(keep.size());
  const std::size_t full = std::size_t{1} << qubits;
  auto reduced_index = [&](std::size_t i) {
    std::size_t r = 0;
    for (int q : keep) r = (r << 1U) | static_cast<std::size_t>(bit_of(i, q, qubits));
    return r;
  };
  auto environment_index = [&](std::size_t i) {
    std::size_t e = 0;
    for (int q : traced) e = (e << 1U) | static_cast<std::size_t>(bit_of(i, q, qubits));
    return e;
  };
  const auto dk = Eigen::Index{1} << kept;
  Matrix out = Matrix::Zero(dk, dk);
  for (std::size_t i = 0; i < full; ++i) {
    for (std::size_t j = 0; j < full; ++j) {
      if (environment_index(i) != environment_index(j)) continue;
      out(static_cast<Eigen::Index>(reduced_index(i)), static_cast<Eigen::Index>(reduced_index(j))) +=
          rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep) {
  Matrix reduced = partial_trace(rho.entries(), rho.qubit_count(), keep);
  return DensityMatrix(0.5 * (reduced + reduced.adjoint()));
}

ProjectionOutcome project_qubit(const PureState& psi, int qubit, const PureState& onto) {
  if (onto.qubit_count() != 1) {
    throw TomoError(ErrorCode::InvalidArgument, "project_qubit: target must be a 1-qubit state");
  }
  const int n = psi.qubit_count();
  if (qubit < 0 || qubit >= n) {
    throw TomoError(ErrorCode::InvalidArgument, "project_qubit: qubit index out of range");
  }
  if (n < 2) {
    throw TomoError(ErrorCode::InvalidArgument, "project_qubit: nothing left after projection");
  }
  const Vector& amps = psi.amplitudes();
  const Complex bra0 = std::conj(onto.amplitudes()(0));
  const Complex bra1 = std::conj(onto.amplitudes()(1));
  const auto out_dim = Eigen::Index{1} << (n - 1);
  const int low_bits = n - 1 - qubit;
  Vector out = Vector::Zero(out_dim);
  for (Eigen::Index k = 0; k < out_dim; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const std::size_t high = (ku >> low_bits) << (low_bits + 1);
    const std::size_t low = ku & ((std::size_t{1} << low_bits) - 1);
    const std::size_t i0 = high | low;
    const std::size_t i1 = i0 | (std::size_t{1} << low_bits);
    out(k) = bra0 * amps(static_cast<Eigen::Index>(i0)) + bra1 * amps(static_cast<Eigen::Index>(i1));
  }
  const double probability = out.squaredNorm();
  if (probability < 1e-14) {
    throw TomoError(ErrorCode::DegenerateProjection, "project_qubit: projection probability vanishes");
  }
  return {PureState(out / std::sqrt(probability)), probability};
}

PureState permute_qubits(const PureState& psi, std::span<const int> order) {
  const int n = psi.qubit_count();
  std::vector<int> check(order.begin(), order.end());
  std::sort(check.begin(), check.end());
  for (int q = 0; q < n; ++q) {
    if (static_cast<int>(check.size()) != n || check[static_cast<std::size_t>(q)] != q) {
      throw TomoError(ErrorCode::InvalidArgument, "permute_qubits: order is not a permutation");
    }
  }
  const std::size_t d = psi.dimension();
  Vector out(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    std::size_t src = 0;
    for (int k = 0; k < n; ++k) {
      const int bit = bit_of(i, k, n);
      src |= static_cast<std::size_t>(bit) << (n - 1 - order[static_cast<std::size_t>(k)]);
    }
    out(static_cast<Eigen::Index>(i)) = psi.amplitudes()(static_cast<Eigen::Index>(src));
  }
  return PureState(std::move(out));
}

double fidelity_pure(const DensityMatrix& rho, const PureState& psi) {
  require_same_dimension(rho.dimension(), psi.dimension(), "fidelity_pure");
  const Vector& v = psi.amplitudes();
  const Complex f = v.dot(rho.entries() * v);
  return std::clamp(f.real(), 0.0, 1.0);
}

double expectation(const DensityMatrix& rho, const HermitianOperator& obs) {
  require_same_dimension(rho.dimension(), obs.dimension(), "expectation");
  const Complex value = (obs.entries() * rho.entries()).trace();
  if (std::abs(value.imag()) > 1e-10) {
    throw TomoError(ErrorCode::NotHermitian, "expectation: imaginary residue above 1e-10");
  }
  return value.real();
}

EigenSystem eigendecompose(const Matrix& h) {
  if (h.rows() != h.cols()) {
    throw TomoError(ErrorCode::DimensionMismatch, "eigendecompose: matrix is not square");
  }
  if (hermitian_defect(h) > kHermitianTolerance) {
    throw TomoError(ErrorCode::NotHermitian, "eigendecompose: matrix is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  if (solver.info() != Eigen::Success) {
    throw TomoError(ErrorCode::InvalidArgument, "eigendecompose: solver did not converge");
  }
  const Eigen::Index d = h.rows();
  EigenSystem out{Eigen::VectorXd(d), Matrix(d, d)};
  for (Eigen::Index k = 0; k < d; ++k) {
    out.values(k) = solver.eigenvalues()(d - 1 - k);
    out.vectors.col(k) = solver.eigenvectors().col(d - 1 - k);
  }
  return out;
}

EigenSystem eigendecompose(const HermitianOperator& h) { return eigendecompose(h.entries()); }

double trace_distance(const Matrix& a, const Matrix& b) {
  const Matrix diff = a - b;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

double max_abs_difference(const Matrix& a, const Matrix& b) {
  require_same_dimension(static_cast<std::size_t>(a.size()), static_cast<std::size_t>(b.size()),
                         "max_abs_difference");
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace ghztomo
