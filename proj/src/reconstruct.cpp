#include "ghztomo/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ghztomo/optimize.hpp"

namespace ghztomo {

namespace {

constexpr int kDim = 8;
constexpr double kUnphysicalThreshold = -1e-6;
constexpr double kWarmStartMixing = 1e-3;

// Index of the (re, im) pair for strictly-lower entry (i, j) inside t.
constexpr std::size_t offdiag_offset(int i, int j) {
  // Rows 1..7, row i holds i entries; row-major over the strict lower triangle.
  return static_cast<std::size_t>(kDim + 2 * (i * (i - 1) / 2 + j));
}

struct HermitianBasis {
  Eigen::MatrixXd design;  // 64 x 64, row nu, column k = <psi_nu|B_k|psi_nu>
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> solver;
  double condition = 0.0;
};

Matrix basis_element(int k) {
  Matrix b = Matrix::Zero(kDim, kDim);
  if (k < kDim) {
    b(k, k) = 1.0;
    return b;
  }
  int pair = (k - kDim) / 2;
  const bool imaginary = ((k - kDim) % 2) == 1;
  int i = 1;
  while (pair >= i) {
    pair -= i;
    ++i;
  }
  const int j = pair;
  if (imaginary) {
    b(i, j) = Complex{0.0, 1.0};
    b(j, i) = Complex{0.0, -1.0};
  } else {
    b(i, j) = 1.0;
    b(j, i) = 1.0;
  }
  return b;
}

const std::array<Vector, kSettings>& setting_states() {
  static const std::array<Vector, kSettings> states = [] {
    std::array<Vector, kSettings> out;
    for (int nu = 0; nu < kSettings; ++nu) {
      out[static_cast<std::size_t>(nu)] = projector_state(AnalyzerSetting::from_index(nu)).amplitudes();
    }
    return out;
  }();
  return states;
}

const HermitianBasis& hermitian_basis() {
  static const HermitianBasis basis = [] {
    HermitianBasis hb;
    hb.design.resize(kSettings, kSettings);
    for (int k = 0; k < kSettings; ++k) {
      const Matrix b = basis_element(k);
      for (int nu = 0; nu < kSettings; ++nu) {
        const Vector& psi = setting_states()[static_cast<std::size_t>(nu)];
        hb.design(nu, k) = psi.dot(b * psi).real();
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(hb.design);
    const auto& sv = svd.singularValues();
    hb.condition = sv(0) / sv(sv.size() - 1);
    hb.solver.compute(hb.design);
    return hb;
  }();
  return basis;
}

double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

// Count data in record order, with the matching projector states.
struct Observations {
  std::vector<const Vector*> states;
  std::vector<double> counts;
  double total = 0.0;
  double constant = 0.0;  // sum of n ln n - n, so the deviance vanishes at a perfect fit
};

Observations gather(const TomographySet& set) {
  Observations obs;
  for (const auto& r : set.records()) {
    obs.states.push_back(&setting_states()[static_cast<std::size_t>(r.setting.index())]);
    const double n = r.corrected_count();
    obs.counts.push_back(n);
    obs.total += n;
    if (n > 0.0) obs.constant += n * std::log(n) - n;
  }
  return obs;
}

Matrix lower_from(const double* t) {
  Matrix lower = Matrix::Zero(kDim, kDim);
  for (int i = 0; i < kDim; ++i) lower(i, i) = t[i];
  for (int i = 1; i < kDim; ++i) {
    for (int j = 0; j < i; ++j) {
      const std::size_t o = offdiag_offset(i, j);
      lower(i, j) = Complex{t[o], t[o + 1]};
    }
  }
  return lower;
}

// Minimization objective in scaled parameters x = t / sqrt(flux_scale),
// divided by the total count so its magnitude is O(1).
class LikelihoodObjective {
 public:
  LikelihoodObjective(const Observations& obs, LikelihoodModel model, double flux_scale)
      : obs_(obs), model_(model), flux_scale_(flux_scale), norm_(std::max(obs.total, 1.0)) {}

  double operator()(const std::vector<double>& x, std::vector<double>& grad) const {
    const Matrix lower = lower_from(x.data());
    Matrix gradient_matrix = Matrix::Zero(kDim, kDim);
    double value = 0.0;
    for (std::size_t nu = 0; nu < obs_.counts.size(); ++nu) {
      const Vector& psi = *obs_.states[nu];
      const Vector tpsi = lower.triangularView<Eigen::Lower>() * psi;
      const double lambda = flux_scale_ * tpsi.squaredNorm();
      const double n = obs_.counts[nu];
      double dvalue = 0.0;
      if (model_ == LikelihoodModel::Poisson) {
        if (lambda > kIntensityFloor) {
          value += lambda - n * std::log(lambda);
          dvalue = 1.0 - n / lambda;
        } else {
          value += lambda - n * std::log(kIntensityFloor);
          dvalue = 1.0;
        }
      } else {
        const double var = std::max(n, 1.0);
        value += 0.5 * (lambda - n) * (lambda - n) / var;
        dvalue = (lambda - n) / var;
      }
      gradient_matrix.noalias() += (2.0 * flux_scale_ * dvalue) * (tpsi * psi.adjoint());
    }
    if (model_ == LikelihoodModel::Poisson) value += obs_.constant;
    for (int i = 0; i < kDim; ++i) grad[static_cast<std::size_t>(i)] = gradient_matrix(i, i).real() / norm_;
    for (int i = 1; i < kDim; ++i) {
      for (int j = 0; j < i; ++j) {
        const std::size_t o = offdiag_offset(i, j);
        grad[o] = gradient_matrix(i, j).real() / norm_;
        grad[o + 1] = gradient_matrix(i, j).imag() / norm_;
      }
    }
    return value / norm_;
  }

  // Converts a minimized objective value back to the Poisson log-likelihood.
  double log_likelihood(double objective) const {
    return obs_.constant - objective * norm_;
  }

 private:
  const Observations& obs_;
  LikelihoodModel model_;
  double flux_scale_;
  double norm_;
};

double log_likelihood_of(const Observations& obs, const Matrix& unnormalized) {
  double sum = 0.0;
  for (std::size_t nu = 0; nu < obs.counts.size(); ++nu) {
    const Vector& psi = *obs.states[nu];
    const double lambda = std::max(psi.dot(unnormalized * psi).real(), kIntensityFloor);
    sum += obs.counts[nu] * std::log(lambda) - lambda;
  }
  return sum;
}

}  // namespace

// ----------------------------------------------------------- Cholesky

Matrix CholeskyParams::lower_triangular() const { return lower_from(t.data()); }

Matrix CholeskyParams::gram() const {
  const Matrix lower = lower_triangular();
  return lower.adjoint() * lower;
}

DensityMatrix CholeskyParams::density() const {
  const Matrix g = gram();
  const double trace = g.trace().real();
  if (!(trace > 0.0)) throw TomoError(ErrorCode::InvalidArgument, "Cholesky parameters are all zero");
  const Matrix rho = g / trace;
  return DensityMatrix(0.5 * (rho + rho.adjoint()));
}

CholeskyParams CholeskyParams::from_gram(const Matrix& m) {
  if (m.rows() != kDim || m.cols() != kDim) {
    throw TomoError(ErrorCode::DimensionMismatch, "from_gram: need an 8x8 matrix");
  }
  // With J the reversal permutation, J m J = L L^dagger gives m = T^dagger T for T = J L^dagger J.
  const Matrix reversed = m.colwise().reverse().rowwise().reverse();
  Eigen::LLT<Matrix> llt(0.5 * (reversed + reversed.adjoint()));
  if (llt.info() != Eigen::Success) {
    throw TomoError(ErrorCode::NotPhysical, "from_gram: matrix is not positive definite");
  }
  const Matrix l = llt.matrixL();
  const Matrix lower = Matrix(l.adjoint()).colwise().reverse().rowwise().reverse();
  CholeskyParams p;
  for (int i = 0; i < kDim; ++i) p.t[static_cast<std::size_t>(i)] = lower(i, i).real();
  for (int i = 1; i < kDim; ++i) {
    for (int j = 0; j < i; ++j) {
      const std::size_t o = offdiag_offset(i, j);
      p.t[o] = lower(i, j).real();
      p.t[o + 1] = lower(i, j).imag();
    }
  }
  return p;
}

std::string to_string(Method m) { return m == Method::Linear ? "linear" : "mle"; }
std::string to_string(LikelihoodModel m) { return m == LikelihoodModel::Poisson ? "poisson" : "gaussian"; }

DensityMatrix ReconstructionResult::state() const {
  if (!physical) {
    throw TomoError(ErrorCode::NotPhysical,
                    "reconstructed matrix has eigenvalue " + std::to_string(min_eigenvalue));
  }
  return DensityMatrix::sanitize(rho);
}

double poisson_log_likelihood(const TomographySet& set, const Matrix& rho, double flux) {
  return log_likelihood_of(gather(set), flux * rho);
}

// ------------------------------------------------------ linear inversion

ReconstructionResult linear_invert(const TomographySet& set) {
  const HermitianBasis& basis = hermitian_basis();
  if (!(basis.condition < 1e8)) {
    throw TomoError(ErrorCode::InvalidArgument, "projector set is not informationally complete");
  }
  Eigen::VectorXd rhs(kSettings);
  for (const auto& r : set.records()) rhs(r.setting.index()) = r.corrected_count();
  const Eigen::VectorXd coeffs = basis.solver.solve(rhs);

  Matrix unnormalized = Matrix::Zero(kDim, kDim);
  for (int k = 0; k < kSettings; ++k) unnormalized += coeffs(k) * basis_element(k);
  const double flux = unnormalized.trace().real();
  if (!(flux > 0.0)) throw TomoError(ErrorCode::MissingData, "linear_invert: no counts to invert");

  ReconstructionResult result;
  result.method = Method::Linear;
  result.rho = unnormalized / flux;
  result.flux = flux;
  result.converged = true;
  result.min_eigenvalue = min_eigenvalue(result.rho);
  result.physical = result.min_eigenvalue >= kUnphysicalThreshold;
  result.log_likelihood = log_likelihood_of(gather(set), unnormalized);
  return result;
}

// ------------------------------------------------------------------- MLE

double likelihood_objective(const TomographySet& set, LikelihoodModel model, const std::vector<double>& t,
                            std::vector<double>& gradient) {
  if (t.size() != static_cast<std::size_t>(kCholeskyParams)) {
    throw TomoError(ErrorCode::DimensionMismatch, "likelihood_objective expects 64 parameters");
  }
  const Observations obs = gather(set);
  gradient.assign(t.size(), 0.0);
  return LikelihoodObjective(obs, model, 1.0)(t, gradient);
}

ReconstructionResult mle_reconstruct(const TomographySet& set, const MleOptions& options,
                                     std::optional<CholeskyParams> init) {
  const Observations obs = gather(set);
  if (!(obs.total > 0.0)) throw TomoError(ErrorCode::MissingData, "mle_reconstruct: all counts are zero");
  if (options.restarts < 0) throw TomoError(ErrorCode::InvalidArgument, "restarts must be >= 0");

  double flux0 = set.rectilinear_total();
  if (!(flux0 > 0.0)) flux0 = obs.total / 8.0;
  const double scale = flux0;
  const double root = std::sqrt(scale);

  std::vector<std::vector<double>> starts;
  if (init) {
    starts.emplace_back(init->t.begin(), init->t.end());
    for (double& v : starts.back()) v /= root;
  } else {
    Matrix warm = Matrix::Identity(kDim, kDim) / static_cast<double>(kDim);
    try {
      const ReconstructionResult lin = linear_invert(set);
      warm = (1.0 - kWarmStartMixing) * DensityMatrix::sanitize(lin.rho).entries() +
             kWarmStartMixing * Matrix::Identity(kDim, kDim) / static_cast<double>(kDim);
    } catch (const TomoError&) {
      // Maximally mixed fallback.
    }
    const CholeskyParams p = CholeskyParams::from_gram(warm);
    starts.emplace_back(p.t.begin(), p.t.end());
  }
  std::mt19937_64 engine = derived_engine(options.seed, 0x6d6c65U);
  std::normal_distribution<double> normal(0.0, 1.0 / kDim);
  for (int r = 0; r < options.restarts; ++r) {
    std::vector<double> x(kCholeskyParams);
    for (double& v : x) v = normal(engine);
    for (int i = 0; i < kDim; ++i) x[static_cast<std::size_t>(i)] = std::abs(x[static_cast<std::size_t>(i)]) + 0.05;
    starts.push_back(std::move(x));
  }

  const LikelihoodObjective objective(obs, options.model, scale);
  optimize::BfgsOptions bfgs_options;
  bfgs_options.max_iterations = options.max_iterations;
  bfgs_options.relative_f_tolerance = options.relative_tolerance;
  bfgs_options.step_tolerance = options.step_tolerance;

  optimize::Minimum best;
  best.value = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    optimize::Minimum m = optimize::bfgs(std::cref(objective), start, bfgs_options);
    if (m.value < best.value) best = std::move(m);
  }

  CholeskyParams fitted;
  for (std::size_t k = 0; k < fitted.t.size(); ++k) fitted.t[k] = best.x[k] * root;
  const Matrix gram = fitted.gram();

  ReconstructionResult result;
  result.method = Method::Mle;
  result.flux = gram.trace().real();
  const Matrix rho = gram / result.flux;
  result.rho = 0.5 * (rho + rho.adjoint());
  result.iterations = best.iterations;
  result.converged = best.converged;
  result.min_eigenvalue = min_eigenvalue(result.rho);
  result.physical = result.min_eigenvalue >= kPsdFloor;
  result.log_likelihood = log_likelihood_of(obs, gram);
  result.likelihood_trace.reserve(best.trace.size());
  for (double f : best.trace) {
    result.likelihood_trace.push_back(options.model == LikelihoodModel::Poisson
                                          ? objective.log_likelihood(f)
                                          : -f);
  }
  return result;
}

// ----------------------------------------------------------- Monte Carlo

const QuantityStatistics& MonteCarloSummary::at(const std::string& name) const {
  for (const auto& q : quantities) {
    if (q.name == name) return q;
  }
  throw TomoError(ErrorCode::InvalidArgument, "no Monte-Carlo quantity named " + name);
}

MonteCarloSummary monte_carlo(const TomographySet& set, int trials, std::uint64_t seed,
                              const std::vector<NamedQuantity>& quantities, const MleOptions& options) {
  if (trials < 2) throw TomoError(ErrorCode::InvalidArgument, "monte_carlo needs at least 2 trials");

  std::vector<std::vector<double>> samples(quantities.size(), std::vector<double>(static_cast<std::size_t>(trials)));
  for (int k = 0; k < trials; ++k) {
    auto engine = derived_engine(seed, static_cast<std::uint64_t>(k));
    std::vector<TomographyRecord> records = set.records();
    for (auto& r : records) {
      r.raw_count = sample_poisson(engine, r.corrected_count());
      r.accidental_estimate = 0.0;
      r.scale = 1.0;
    }
    try {
      MleOptions trial_options = options;
      trial_options.seed = options.seed + static_cast<std::uint64_t>(k) + 1;
      const DensityMatrix rho =
          mle_reconstruct(TomographySet(std::move(records), set.flux_hint()), trial_options).state();
      for (std::size_t q = 0; q < quantities.size(); ++q) {
        samples[q][static_cast<std::size_t>(k)] = quantities[q].evaluate(rho);
      }
    } catch (const TomoError& e) {
      throw TomoError(e.code(), "Monte-Carlo trial " + std::to_string(k) + " failed: " + e.what());
    }
  }

  MonteCarloSummary summary;
  summary.trial_count = trials;
  for (std::size_t q = 0; q < quantities.size(); ++q) {
    const auto& s = samples[q];
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(trials);
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    var /= static_cast<double>(trials - 1);
    summary.quantities.push_back({quantities[q].name, mean, std::sqrt(var)});
  }
  return summary;
}

}  // namespace ghztomo
