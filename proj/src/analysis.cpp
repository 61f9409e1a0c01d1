#include "ghztomo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ghztomo/optimize.hpp"
#include "ghztomo/tomo_model.hpp"

namespace ghztomo {

namespace {

constexpr double kWitnessOffset = 0.75;
constexpr double kWootersClamp = -1e-10;

void require_three_qubits(const DensityMatrix& rho, const char* what) {
  if (rho.qubit_count() != 3) {
    throw TomoError(ErrorCode::DimensionMismatch, std::string(what) + ": need a 3-qubit state");
  }
}

// U|GHZ> for a product of three 2x2 unitaries, without forming the 8x8 matrix.
Vector rotated_ghz(const std::array<Eigen::Matrix2cd, 3>& u) {
  Vector out(8);
  const double amp = std::numbers::sqrt2 / 2.0;
  for (int i = 0; i < 8; ++i) {
    const int a = (i >> 2) & 1;
    const int b = (i >> 1) & 1;
    const int c = i & 1;
    out(i) = amp * (u[0](a, 0) * u[1](b, 0) * u[2](c, 0) + u[0](a, 1) * u[1](b, 1) * u[2](c, 1));
  }
  return out;
}

double ghz_overlap(const Matrix& rho, std::span<const double> angles) {
  std::array<Eigen::Matrix2cd, 3> u;
  for (int q = 0; q < 3; ++q) {
    const auto k = static_cast<std::size_t>(3 * q);
    u[static_cast<std::size_t>(q)] = euler_unitary(angles[k], angles[k + 1], angles[k + 2]);
  }
  const Vector v = rotated_ghz(u);
  return v.dot(rho * v).real();
}

// Tr[rho (a (x) b (x) c)] by direct summation.
double correlation(const Matrix& rho, const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b,
                   const Eigen::Matrix2cd& c) {
  Complex sum = 0.0;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      const Complex o = a((i >> 2) & 1, (j >> 2) & 1) * b((i >> 1) & 1, (j >> 1) & 1) * c(i & 1, j & 1);
      sum += o * rho(j, i);
    }
  }
  return sum.real();
}

BlochMeasurement from_angles(const std::vector<double>& x, std::size_t k) {
  return {x[2 * k], x[2 * k + 1]};
}

MerminSettings settings_from(const std::vector<double>& x) {
  return {from_angles(x, 0), from_angles(x, 1), from_angles(x, 2),
          from_angles(x, 3), from_angles(x, 4), from_angles(x, 5)};
}

std::vector<double> angles_of(const MerminSettings& s) {
  return {s.a.theta, s.a.phi, s.a_prime.theta, s.a_prime.phi, s.b.theta, s.b.phi,
          s.b_prime.theta, s.b_prime.phi, s.c.theta, s.c.phi, s.c_prime.theta, s.c_prime.phi};
}

// Folds polar angles back into [0, pi] and azimuths into [0, 2 pi).
BlochMeasurement canonical(BlochMeasurement m) {
  const double two_pi = 2.0 * std::numbers::pi;
  double theta = std::fmod(m.theta, two_pi);
  if (theta < 0.0) theta += two_pi;
  double phi = m.phi;
  if (theta > std::numbers::pi) {
    theta = two_pi - theta;
    phi += std::numbers::pi;
  }
  phi = std::fmod(phi, two_pi);
  if (phi < 0.0) phi += two_pi;
  return {theta, phi};
}

optimize::NelderMeadOptions angle_search_options() {
  optimize::NelderMeadOptions opts;
  opts.initial_step = 0.4;
  opts.f_tolerance = 1e-14;
  opts.x_tolerance = 1e-9;
  opts.max_restarts = 6;
  return opts;
}

}  // namespace

std::array<double, 3> BlochMeasurement::direction() const {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

Eigen::Matrix2cd BlochMeasurement::observable() const {
  const auto n = direction();
  return n[0] * pauli::x() + n[1] * pauli::y() + n[2] * pauli::z();
}

double ghz_fidelity(const DensityMatrix& rho) {
  require_three_qubits(rho, "ghz_fidelity");
  return fidelity_pure(rho, states::ghz(3));
}

double witness_value(const DensityMatrix& rho, const LocalUnitary& u) {
  require_three_qubits(rho, "witness_value");
  if (u.qubit_count() != 3) throw TomoError(ErrorCode::DimensionMismatch, "witness_value: need 3 qubits");
  return kWitnessOffset - ghz_overlap(rho.entries(), u.angles());
}

WitnessResult witness_minimum(const DensityMatrix& rho, int restarts, std::uint64_t seed) {
  require_three_qubits(rho, "witness_minimum");
  if (restarts < 1) throw TomoError(ErrorCode::InvalidArgument, "witness_minimum: restarts must be >= 1");
  const Matrix& m = rho.entries();
  auto objective = [&m](const std::vector<double>& x) { return -ghz_overlap(m, x); };

  std::mt19937_64 engine = derived_engine(seed, 0x77U);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<double> best_x(9, 0.0);
  double best = objective(best_x);
  for (int r = 0; r < restarts; ++r) {
    std::vector<double> start(9, 0.0);
    if (r > 0) {
      for (double& a : start) a = angle(engine);
    }
    const auto result = optimize::nelder_mead(objective, start, angle_search_options());
    // Strict improvement keeps the lowest restart index on ties.
    if (result.value < best - 1e-15) {
      best = result.value;
      best_x = result.x;
    }
  }
  WitnessResult out;
  out.optimal_unitary = LocalUnitary(3, best_x);
  out.value = witness_value(rho, out.optimal_unitary);
  out.restarts_used = restarts;
  return out;
}

double mermin_correlation(const DensityMatrix& rho, const BlochMeasurement& a, const BlochMeasurement& b,
                          const BlochMeasurement& c) {
  require_three_qubits(rho, "mermin_correlation");
  return std::clamp(correlation(rho.entries(), a.observable(), b.observable(), c.observable()), -1.0, 1.0);
}

double mermin_parameter(const DensityMatrix& rho, const MerminSettings& s) {
  require_three_qubits(rho, "mermin_parameter");
  const Matrix& m = rho.entries();
  const Eigen::Matrix2cd a = s.a.observable(), ap = s.a_prime.observable();
  const Eigen::Matrix2cd b = s.b.observable(), bp = s.b_prime.observable();
  const Eigen::Matrix2cd c = s.c.observable(), cp = s.c_prime.observable();
  return std::abs(correlation(m, a, b, cp) + correlation(m, a, bp, c) + correlation(m, ap, b, c) -
                  correlation(m, ap, bp, cp));
}

MerminResult mermin_maximum(const DensityMatrix& rho, int restarts, std::uint64_t seed) {
  require_three_qubits(rho, "mermin_maximum");
  if (restarts < 1) throw TomoError(ErrorCode::InvalidArgument, "mermin_maximum: restarts must be >= 1");
  auto objective = [&rho](const std::vector<double>& x) { return -mermin_parameter(rho, settings_from(x)); };

  const BlochMeasurement x = BlochMeasurement::x();
  const BlochMeasurement y = BlochMeasurement::y();
  std::vector<std::vector<double>> starts;
  starts.push_back(angles_of({y, x, y, x, y, x}));
  starts.push_back(angles_of({x, y, x, y, x, y}));

  std::mt19937_64 engine = derived_engine(seed, 0x6dU);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 1; r < restarts; ++r) {
    std::vector<double> s(12);
    for (std::size_t k = 0; k < 6; ++k) {
      s[2 * k] = std::acos(1.0 - 2.0 * unit(engine));
      s[2 * k + 1] = 2.0 * std::numbers::pi * unit(engine);
    }
    starts.push_back(std::move(s));
  }

  std::vector<double> best_x = starts.front();
  double best = objective(best_x);
  for (const auto& start : starts) {
    const auto result = optimize::nelder_mead(objective, start, angle_search_options());
    if (result.value < best - 1e-15) {
      best = result.value;
      best_x = result.x;
    }
  }
  MerminSettings s = settings_from(best_x);
  for (BlochMeasurement* m : {&s.a, &s.a_prime, &s.b, &s.b_prime, &s.c, &s.c_prime}) *m = canonical(*m);
  MerminResult out;
  out.settings = s;
  out.value = mermin_parameter(rho, s);
  out.restarts_used = restarts;
  return out;
}

double concurrence2(const DensityMatrix& rho2) {
  if (rho2.qubit_count() != 2) {
    throw TomoError(ErrorCode::DimensionMismatch, "concurrence2: need a 2-qubit state");
  }
  const Matrix& rho = rho2.entries();
  const EigenSystem es = eigendecompose(0.5 * (rho + Matrix(rho.adjoint())));
  if (es.values.minCoeff() < kPsdFloor) {
    throw TomoError(ErrorCode::NotPhysical, "concurrence2: state is not positive semidefinite");
  }
  const Eigen::VectorXd roots = es.values.cwiseMax(0.0).cwiseSqrt();
  const Matrix sqrt_rho = es.vectors * roots.cast<Complex>().asDiagonal() * es.vectors.adjoint();
  const Matrix yy = kron(pauli::y(), pauli::y());
  const Matrix flipped = yy * rho.conjugate() * yy;
  const Matrix product = sqrt_rho * flipped * sqrt_rho;
  const EigenSystem w = eigendecompose(Matrix(0.5 * (product + Matrix(product.adjoint()))));
  std::array<double, 4> lambda{};
  for (int k = 0; k < 4; ++k) {
    const double v = w.values(k);
    if (v < kWootersClamp) {
      throw TomoError(ErrorCode::NotPhysical, "concurrence2: negative eigenvalue in the spin-flip product");
    }
    lambda[static_cast<std::size_t>(k)] = std::sqrt(std::max(v, 0.0));
  }
  return std::clamp(lambda[0] - lambda[1] - lambda[2] - lambda[3], 0.0, 1.0);
}

AnalysisReport full_report(const DensityMatrix& rho, const AnalysisOptions& options) {
  require_three_qubits(rho, "full_report");
  AnalysisReport report;
  report.fidelity = ghz_fidelity(rho);
  report.witness = witness_minimum(rho, options.restarts, options.seed);
  report.mermin = mermin_maximum(rho, options.restarts, options.seed);
  for (int traced = 0; traced < 3; ++traced) {
    std::vector<int> keep;
    for (int q = 0; q < 3; ++q) {
      if (q != traced) keep.push_back(q);
    }
    report.concurrences[static_cast<std::size_t>(traced)] = concurrence2(partial_trace(rho, keep));
  }
  return report;
}

std::vector<NamedQuantity> report_quantities(const AnalysisOptions& options) {
  std::vector<NamedQuantity> q;
  q.push_back({"fidelity", [](const DensityMatrix& rho) { return ghz_fidelity(rho); }});
  q.push_back({"witness", [options](const DensityMatrix& rho) {
                 return witness_minimum(rho, options.restarts, options.seed).value;
               }});
  q.push_back({"mermin", [options](const DensityMatrix& rho) {
                 return mermin_maximum(rho, options.restarts, options.seed).value;
               }});
  const std::array<const char*, 3> names{"concurrence_B1", "concurrence_A1", "concurrence_AB"};
  for (int traced = 0; traced < 3; ++traced) {
    q.push_back({names[static_cast<std::size_t>(traced)], [traced](const DensityMatrix& rho) {
                   std::vector<int> keep;
                   for (int k = 0; k < 3; ++k) {
                     if (k != traced) keep.push_back(k);
                   }
                   return concurrence2(partial_trace(rho, keep));
                 }});
  }
  return q;
}

}  // namespace ghztomo
