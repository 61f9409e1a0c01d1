// reconstruct.hpp
// Density-matrix reconstruction from a tomography set.
//
// linear_invert solves the Born-rule system directly and may return an
// unphysical matrix. mle_reconstruct maximizes the count likelihood over the
// Cholesky parameterization rho = T^dagger T / Tr(T^dagger T), with the flux
// carried by the scale of T, so every candidate is a valid state.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ghztomo/qlin.hpp"
#include "ghztomo/tomo_model.hpp"

namespace ghztomo {

inline constexpr int kCholeskyParams = 64;
inline constexpr double kIntensityFloor = 1e-12;

// 8 real diagonal entries followed by (re, im) of the 28 strictly lower
// entries in row-major order.
struct CholeskyParams {
  std::array<double, kCholeskyParams> t{};

  Matrix lower_triangular() const;
  // T^dagger T, unnormalized; its trace is the flux.
  Matrix gram() const;
  DensityMatrix density() const;

  // Lower-triangular T with T^dagger T = m, for Hermitian positive-definite m.
  static CholeskyParams from_gram(const Matrix& m);
};

enum class Method { Linear, Mle };
enum class LikelihoodModel { Poisson, Gaussian };

std::string to_string(Method m);
std::string to_string(LikelihoodModel m);

struct ReconstructionResult {
  Method method = Method::Mle;
  // Hermitian with unit trace; positive only when `physical`.
  Matrix rho;
  double flux = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  bool physical = false;
  double min_eigenvalue = 0.0;
  // Objective after every accepted iteration of the winning start (MLE only).
  std::vector<double> likelihood_trace;

  // Throws NotPhysical when the matrix failed the positivity check.
  DensityMatrix state() const;
};

struct MleOptions {
  LikelihoodModel model = LikelihoodModel::Poisson;
  // Random starts in addition to the warm start; the best likelihood wins.
  int restarts = 5;
  std::uint64_t seed = 0;
  int max_iterations = 100000;
  double relative_tolerance = 1e-10;
  double step_tolerance = 1e-8;
};

// Sum over settings of n ln(lambda) - lambda with lambda = flux * <psi|rho|psi>,
// lambda floored at kIntensityFloor.
double poisson_log_likelihood(const TomographySet& set, const Matrix& rho, double flux);

// The quantity mle_reconstruct minimizes, evaluated at raw Cholesky
// parameters t: negative log-likelihood (Poisson deviance or Gaussian
// chi-square / 2) divided by the total count. Writes d/dt into `gradient`.
double likelihood_objective(const TomographySet& set, LikelihoodModel model, const std::vector<double>& t,
                            std::vector<double>& gradient);

ReconstructionResult linear_invert(const TomographySet& set);

ReconstructionResult mle_reconstruct(const TomographySet& set, const MleOptions& options = {},
                                     std::optional<CholeskyParams> init = std::nullopt);

// ------------------------------------------------------------ Monte Carlo

struct NamedQuantity {
  std::string name;
  std::function<double(const DensityMatrix&)> evaluate;
};

struct QuantityStatistics {
  std::string name;
  double mean = 0.0;
  double stddev = 0.0;
};

struct MonteCarloSummary {
  std::vector<QuantityStatistics> quantities;
  int trial_count = 0;

  const QuantityStatistics& at(const std::string& name) const;
};

// Resamples each corrected count as Poisson(observed), reconstructs, and
// collects the quantities. Trial k uses the substream (seed, k).
MonteCarloSummary monte_carlo(const TomographySet& set, int trials, std::uint64_t seed,
                              const std::vector<NamedQuantity>& quantities,
                              const MleOptions& options = {});

}  // namespace ghztomo
