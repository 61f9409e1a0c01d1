// tomo_model.hpp
// Measurement model for three-photon polarization tomography: the 64
// analyzer settings, the count model, Poisson simulation, accidental
// background and trigger normalization, and the two-photon interference dip.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ghztomo/qlin.hpp"

namespace ghztomo {

inline constexpr int kPhotons = 3;
inline constexpr int kSettings = 64;
inline constexpr double kDefaultDurationSeconds = 900.0;

enum class Polarization : std::uint8_t { H = 0, V = 1, D = 2, R = 3 };

char to_char(Polarization p);
Polarization polarization_from_char(char c);
PureState polarization_state(Polarization p);

// Analyzer orientation for photons (A, B, 1). Index = 16*code(A) + 4*code(B) + code(1).
class AnalyzerSetting {
 public:
  AnalyzerSetting() = default;
  explicit AnalyzerSetting(std::array<Polarization, kPhotons> labels) : labels_(labels) {}

  static AnalyzerSetting from_index(int index);
  static AnalyzerSetting from_label(std::string_view label);

  int index() const;
  std::string label() const;
  const std::array<Polarization, kPhotons>& labels() const { return labels_; }
  // True when every photon is analyzed in H or V.
  bool is_rectilinear() const;

  friend bool operator==(const AnalyzerSetting&, const AnalyzerSetting&) = default;

 private:
  std::array<Polarization, kPhotons> labels_{Polarization::H, Polarization::H, Polarization::H};
};

// |psi_nu> for a setting.
PureState projector_state(AnalyzerSetting setting);
HermitianOperator projector(AnalyzerSetting setting);

double born_probability(const DensityMatrix& rho, AnalyzerSetting setting);
double expected_count(const DensityMatrix& rho, AnalyzerSetting setting, double flux);

struct TomographyRecord {
  AnalyzerSetting setting;
  std::int64_t raw_count = 0;
  double duration_s = kDefaultDurationSeconds;
  // Zero means the trigger singles were not recorded.
  std::int64_t trigger_singles = 0;
  double accidental_estimate = 0.0;
  // Multiplier applied to the background-subtracted count; set by trigger normalization.
  double scale = 1.0;

  // Raw minus accidental; may be negative.
  double background_subtracted() const;
  // What the reconstruction consumes: max(raw - accidental, 0) * scale.
  double corrected_count() const;
};

class TomographySet {
 public:
  // Requires exactly one record per setting; the given order is preserved.
  explicit TomographySet(std::vector<TomographyRecord> records,
                         std::optional<double> flux_hint = std::nullopt);

  const std::vector<TomographyRecord>& records() const { return records_; }
  const TomographyRecord& at(AnalyzerSetting setting) const;
  std::optional<double> flux_hint() const { return flux_hint_; }

  // Sum of corrected counts over the eight H/V-only settings.
  double rectilinear_total() const;

 private:
  std::vector<TomographyRecord> records_;
  std::array<int, kSettings> position_{};
  std::optional<double> flux_hint_;
};

// Accidental coincidence rates (events/s) per setting.
struct BackgroundModel {
  std::array<double, kSettings> rates_per_s{};

  static BackgroundModel flat(double rate_per_s);
  static BackgroundModel per_setting(const std::array<double, kSettings>& rates);
  bool is_zero() const;
  void validate() const;
};

struct SimulationOptions {
  double duration_s = kDefaultDurationSeconds;
  // When positive, trigger singles are drawn as Poisson(rate * duration).
  double trigger_rate_per_s = 0.0;
  // Accidentals are added to the simulated signal and recorded as estimates.
  BackgroundModel background{};
};

// Independent engine for (seed, stream); used to give every setting or trial its own substream.
std::mt19937_64 derived_engine(std::uint64_t seed, std::uint64_t stream);
std::int64_t sample_poisson(std::mt19937_64& engine, double mean);

TomographySet expected_counts(const DensityMatrix& rho, double flux);
TomographySet simulate_counts(const DensityMatrix& rho, double flux, std::uint64_t seed,
                              const SimulationOptions& options = {});

TomographySet apply_background(const TomographySet& set, const BackgroundModel& model);
TomographySet normalize_by_trigger(const TomographySet& set);

// ---------------------------------------------------------------- dip model

// epsilon * |phi+><phi+| + (1 - epsilon) * (|HH><HH| + |VV><VV|)/2
DensityMatrix dip_state(double epsilon);

struct DipConfig {
  double epsilon0 = 0.69;
  double width_um = 30.0;
  std::vector<double> positions_um;
  double events_per_point = 2000.0;

  void validate() const;
};

struct DipPoint {
  double position_um = 0.0;
  double expected = 0.0;
  std::int64_t count = 0;
};

double dip_overlap(const DipConfig& cfg, double position_um);
// Expected four-fold count with analyzers A and D at the given mirror position.
double dip_expected_count(const DipConfig& cfg, double position_um);
std::vector<DipPoint> dip_curve(const DipConfig& cfg, std::uint64_t seed);
// (max - min) / max of the noiseless curve sampled at the configured positions.
double noiseless_visibility(const DipConfig& cfg);

struct DipFit {
  double baseline = 0.0;
  double visibility = 0.0;
  double center_um = 0.0;
  double width_um = 0.0;
  double residual = 0.0;
};

// Least-squares fit of baseline * (1 - visibility * exp(-(x - center)^2 / (2 width^2))).
DipFit fit_dip(const std::vector<DipPoint>& points);

// ------------------------------------------------------ state preparation

struct GhzPreparation {
  PureState ghz;
  PureState four_photon;
  double parity_check_probability = 0.0;
  double trigger_probability = 0.0;
};

// Two phi+ pairs, polarizing-beam-splitter parity check on modes 2 and 3,
// then the trigger photon (mode 4) projected onto D. Output order (A, B, 1).
GhzPreparation ghz_from_pairs();

}  // namespace ghztomo
