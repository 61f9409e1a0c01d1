// analysis.hpp
// Derived quantities of a three-photon state: GHZ fidelity, the GHZ witness
// minimized over local unitaries, the maximal Mermin parameter, and the
// concurrences of the two-photon reductions.

#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "ghztomo/qlin.hpp"
#include "ghztomo/reconstruct.hpp"

namespace ghztomo {

inline constexpr int kDefaultRestarts = 32;
inline constexpr double kLocalRealismBound = 2.0;

struct WitnessResult {
  double value = 0.0;
  LocalUnitary optimal_unitary{3};
  int restarts_used = 0;
};

// Measurement direction on the Bloch sphere; observable n.sigma.
struct BlochMeasurement {
  double theta = 0.0;
  double phi = 0.0;

  static BlochMeasurement x() { return {kHalfPi, 0.0}; }
  static BlochMeasurement y() { return {kHalfPi, kHalfPi}; }
  static BlochMeasurement z() { return {0.0, 0.0}; }

  std::array<double, 3> direction() const;
  Eigen::Matrix2cd observable() const;

  static constexpr double kHalfPi = 1.57079632679489661923;
};

// Settings for photons A, B and 1, primed and unprimed.
struct MerminSettings {
  BlochMeasurement a, a_prime, b, b_prime, c, c_prime;
};

struct MerminResult {
  double value = 0.0;
  MerminSettings settings;
  int restarts_used = 0;

  bool violates_local_realism() const { return value > kLocalRealismBound; }
};

double ghz_fidelity(const DensityMatrix& rho);

// 3/4 - <GHZ| U^dagger rho U |GHZ>
double witness_value(const DensityMatrix& rho, const LocalUnitary& u);
WitnessResult witness_minimum(const DensityMatrix& rho, int restarts = kDefaultRestarts,
                              std::uint64_t seed = 0);

double mermin_correlation(const DensityMatrix& rho, const BlochMeasurement& a, const BlochMeasurement& b,
                          const BlochMeasurement& c);
// |E(A B C') + E(A B' C) + E(A' B C) - E(A' B' C')|
double mermin_parameter(const DensityMatrix& rho, const MerminSettings& s);
MerminResult mermin_maximum(const DensityMatrix& rho, int restarts = kDefaultRestarts,
                            std::uint64_t seed = 0);

double concurrence2(const DensityMatrix& rho2);

struct AnalysisOptions {
  int restarts = kDefaultRestarts;
  std::uint64_t seed = 0;
};

struct AnalysisReport {
  double fidelity = 0.0;
  WitnessResult witness;
  MerminResult mermin;
  // Index k: reduction with qubit k traced out.
  std::array<double, 3> concurrences{};
  std::optional<MonteCarloSummary> uncertainties;
};

AnalysisReport full_report(const DensityMatrix& rho, const AnalysisOptions& options = {});

// The scalar quantities of a report, packaged for Monte-Carlo propagation.
std::vector<NamedQuantity> report_quantities(const AnalysisOptions& options = {});

}  // namespace ghztomo
