#include "ghztomo/tomo_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ghztomo/optimize.hpp"

namespace ghztomo {

// ------------------------------------------------------------ settings

char to_char(Polarization p) {
  switch (p) {
    case Polarization::H: return 'H';
    case Polarization::V: return 'V';
    case Polarization::D: return 'D';
    case Polarization::R: return 'R';
  }
  return '?';
}

Polarization polarization_from_char(char c) {
  switch (c) {
    case 'H': return Polarization::H;
    case 'V': return Polarization::V;
    case 'D': return Polarization::D;
    case 'R': return Polarization::R;
    default:
      throw TomoError(ErrorCode::Parse, std::string("unknown analyzer label '") + c + "'");
  }
}

PureState polarization_state(Polarization p) {
  switch (p) {
    case Polarization::H: return states::h();
    case Polarization::V: return states::v();
    case Polarization::D: return states::d();
    case Polarization::R: return states::r();
  }
  throw TomoError(ErrorCode::InvalidArgument, "invalid polarization");
}

AnalyzerSetting AnalyzerSetting::from_index(int index) {
  if (index < 0 || index >= kSettings) {
    throw TomoError(ErrorCode::InvalidArgument, "setting index out of range");
  }
  return AnalyzerSetting({static_cast<Polarization>((index >> 4) & 3),
                          static_cast<Polarization>((index >> 2) & 3),
                          static_cast<Polarization>(index & 3)});
}

AnalyzerSetting AnalyzerSetting::from_label(std::string_view label) {
  if (label.size() != kPhotons) {
    throw TomoError(ErrorCode::Parse, "setting label must have three letters: '" +
                                          std::string(label) + "'");
  }
  return AnalyzerSetting({polarization_from_char(label[0]), polarization_from_char(label[1]),
                          polarization_from_char(label[2])});
}

int AnalyzerSetting::index() const {
  return 16 * static_cast<int>(labels_[0]) + 4 * static_cast<int>(labels_[1]) +
         static_cast<int>(labels_[2]);
}

std::string AnalyzerSetting::label() const {
  return {to_char(labels_[0]), to_char(labels_[1]), to_char(labels_[2])};
}

bool AnalyzerSetting::is_rectilinear() const {
  return std::all_of(labels_.begin(), labels_.end(),
                     [](Polarization p) { return p == Polarization::H || p == Polarization::V; });
}

PureState projector_state(AnalyzerSetting setting) {
  const auto& l = setting.labels();
  return tensor_product(tensor_product(polarization_state(l[0]), polarization_state(l[1])),
                        polarization_state(l[2]));
}

HermitianOperator projector(AnalyzerSetting setting) {
  return HermitianOperator::projector(projector_state(setting));
}

double born_probability(const DensityMatrix& rho, AnalyzerSetting setting) {
  if (rho.qubit_count() != kPhotons) {
    throw TomoError(ErrorCode::DimensionMismatch, "born_probability: need a 3-qubit state");
  }
  return fidelity_pure(rho, projector_state(setting));
}

double expected_count(const DensityMatrix& rho, AnalyzerSetting setting, double flux) {
  if (!(flux > 0.0)) throw TomoError(ErrorCode::InvalidArgument, "flux must be positive");
  return flux * born_probability(rho, setting);
}

// ------------------------------------------------------------- records

double TomographyRecord::background_subtracted() const {
  return static_cast<double>(raw_count) - accidental_estimate;
}

double TomographyRecord::corrected_count() const {
  return std::max(background_subtracted(), 0.0) * scale;
}

TomographySet::TomographySet(std::vector<TomographyRecord> records, std::optional<double> flux_hint)
    : records_(std::move(records)), flux_hint_(flux_hint) {
  position_.fill(-1);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const TomographyRecord& r = records_[i];
    const int nu = r.setting.index();
    if (position_[static_cast<std::size_t>(nu)] >= 0) {
      throw TomoError(ErrorCode::MissingData, "duplicate setting " + r.setting.label());
    }
    if (r.raw_count < 0 || r.trigger_singles < 0 || !(r.duration_s > 0.0) ||
        !(r.accidental_estimate >= 0.0) || !(r.scale > 0.0)) {
      throw TomoError(ErrorCode::InvalidArgument, "invalid record for setting " + r.setting.label());
    }
    position_[static_cast<std::size_t>(nu)] = static_cast<int>(i);
  }
  std::string missing;
  for (int nu = 0; nu < kSettings; ++nu) {
    if (position_[static_cast<std::size_t>(nu)] < 0) {
      missing += (missing.empty() ? "" : " ") + AnalyzerSetting::from_index(nu).label();
    }
  }
  if (!missing.empty()) throw TomoError(ErrorCode::MissingData, "missing settings: " + missing);
}

const TomographyRecord& TomographySet::at(AnalyzerSetting setting) const {
  return records_[static_cast<std::size_t>(position_[static_cast<std::size_t>(setting.index())])];
}

double TomographySet::rectilinear_total() const {
  double total = 0.0;
  for (const auto& r : records_) {
    if (r.setting.is_rectilinear()) total += r.corrected_count();
  }
  return total;
}

// ---------------------------------------------------------- background

BackgroundModel BackgroundModel::flat(double rate_per_s) {
  BackgroundModel m;
  m.rates_per_s.fill(rate_per_s);
  m.validate();
  return m;
}

BackgroundModel BackgroundModel::per_setting(const std::array<double, kSettings>& rates) {
  BackgroundModel m{rates};
  m.validate();
  return m;
}

bool BackgroundModel::is_zero() const {
  return std::all_of(rates_per_s.begin(), rates_per_s.end(), [](double r) { return r == 0.0; });
}

void BackgroundModel::validate() const {
  for (double r : rates_per_s) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw TomoError(ErrorCode::InvalidArgument, "accidental rates must be finite and >= 0");
    }
  }
}

// ----------------------------------------------------------- simulation

std::mt19937_64 derived_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32U),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32U),
                    0x67687a74U};
  return std::mt19937_64(seq);
}

std::int64_t sample_poisson(std::mt19937_64& engine, double mean) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(engine);
}

TomographySet expected_counts(const DensityMatrix& rho, double flux) {
  std::vector<TomographyRecord> records;
  records.reserve(kSettings);
  for (int nu = 0; nu < kSettings; ++nu) {
    TomographyRecord r;
    r.setting = AnalyzerSetting::from_index(nu);
    records.push_back(r);
  }
  // Counts are integral in the record, so noiseless data is carried by `scale`:
  // raw_count = 1 and scale = expectation reproduces arbitrary real counts.
  for (auto& r : records) {
    const double mean = expected_count(rho, r.setting, flux);
    if (mean > 0.0) {
      r.raw_count = 1;
      r.scale = mean;
    } else {
      r.raw_count = 0;
    }
  }
  return TomographySet(std::move(records), flux);
}

TomographySet simulate_counts(const DensityMatrix& rho, double flux, std::uint64_t seed,
                              const SimulationOptions& options) {
  if (!(flux > 0.0)) throw TomoError(ErrorCode::InvalidArgument, "flux must be positive");
  if (!(options.duration_s > 0.0)) throw TomoError(ErrorCode::InvalidArgument, "duration must be positive");
  if (!(options.trigger_rate_per_s >= 0.0)) {
    throw TomoError(ErrorCode::InvalidArgument, "trigger rate must be >= 0");
  }
  options.background.validate();
  std::vector<TomographyRecord> records;
  records.reserve(kSettings);
  for (int nu = 0; nu < kSettings; ++nu) {
    TomographyRecord r;
    r.setting = AnalyzerSetting::from_index(nu);
    r.duration_s = options.duration_s;
    auto engine = derived_engine(seed, static_cast<std::uint64_t>(nu));
    const double accidental = options.background.rates_per_s[static_cast<std::size_t>(nu)] * options.duration_s;
    r.raw_count = sample_poisson(engine, expected_count(rho, r.setting, flux) + accidental);
    r.accidental_estimate = accidental;
    if (options.trigger_rate_per_s > 0.0) {
      r.trigger_singles = sample_poisson(engine, options.trigger_rate_per_s * options.duration_s);
    }
    records.push_back(r);
  }
  return TomographySet(std::move(records), flux);
}

TomographySet apply_background(const TomographySet& set, const BackgroundModel& model) {
  model.validate();
  std::vector<TomographyRecord> records = set.records();
  for (auto& r : records) {
    r.accidental_estimate = r.duration_s * model.rates_per_s[static_cast<std::size_t>(r.setting.index())];
  }
  return TomographySet(std::move(records), set.flux_hint());
}

TomographySet normalize_by_trigger(const TomographySet& set) {
  double mean = 0.0;
  for (const auto& r : set.records()) {
    if (r.trigger_singles <= 0) {
      throw TomoError(ErrorCode::MissingData, "no trigger singles for setting " + r.setting.label());
    }
    mean += static_cast<double>(r.trigger_singles);
  }
  mean /= static_cast<double>(set.records().size());
  std::vector<TomographyRecord> records = set.records();
  for (auto& r : records) {
    const double ratio = mean / static_cast<double>(r.trigger_singles);
    r.scale *= ratio * ratio;
  }
  return TomographySet(std::move(records), set.flux_hint());
}

// ------------------------------------------------------------------- dip

DensityMatrix dip_state(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw TomoError(ErrorCode::InvalidArgument, "dip_state: overlap must lie in [0,1]");
  }
  const DensityMatrix coherent = DensityMatrix::from_pure(states::phi_plus());
  const DensityMatrix mixed = DensityMatrix::mixture(0.5, DensityMatrix::from_pure(PureState::basis("HH")),
                                                     DensityMatrix::from_pure(PureState::basis("VV")));
  return DensityMatrix::mixture(epsilon, coherent, mixed);
}

void DipConfig::validate() const {
  if (!(epsilon0 >= 0.0 && epsilon0 <= 1.0)) {
    throw TomoError(ErrorCode::InvalidArgument, "dip: epsilon0 must lie in [0,1]");
  }
  if (!(width_um > 0.0)) throw TomoError(ErrorCode::InvalidArgument, "dip: width must be positive");
  if (!(events_per_point > 0.0)) {
    throw TomoError(ErrorCode::InvalidArgument, "dip: events per point must be positive");
  }
}

double dip_overlap(const DipConfig& cfg, double position_um) {
  const double u = position_um / cfg.width_um;
  return cfg.epsilon0 * std::exp(-0.5 * u * u);
}

double dip_expected_count(const DipConfig& cfg, double position_um) {
  static const PureState analyzer = tensor_product(states::a(), states::d());
  const double p_ad = fidelity_pure(dip_state(dip_overlap(cfg, position_um)), analyzer);
  return cfg.events_per_point * 4.0 * p_ad;
}

std::vector<DipPoint> dip_curve(const DipConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<DipPoint> out;
  out.reserve(cfg.positions_um.size());
  for (std::size_t i = 0; i < cfg.positions_um.size(); ++i) {
    const double x = cfg.positions_um[i];
    auto engine = derived_engine(seed, i);
    const double mean = dip_expected_count(cfg, x);
    out.push_back({x, mean, sample_poisson(engine, mean)});
  }
  return out;
}

double noiseless_visibility(const DipConfig& cfg) {
  cfg.validate();
  if (cfg.positions_um.empty()) throw TomoError(ErrorCode::InvalidArgument, "dip: no positions");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double x : cfg.positions_um) {
    const double c = dip_expected_count(cfg, x);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  return (hi - lo) / hi;
}

DipFit fit_dip(const std::vector<DipPoint>& points) {
  if (points.size() < 5) throw TomoError(ErrorCode::InvalidArgument, "dip fit needs at least 5 positions");
  std::vector<double> xs;
  for (const auto& p : points) xs.push_back(p.position_um);
  std::sort(xs.begin(), xs.end());
  double min_spacing = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] > xs[i - 1]) min_spacing = std::min(min_spacing, xs[i] - xs[i - 1]);
  }
  const double span = xs.back() - xs.front();
  if (!(span > 0.0)) throw TomoError(ErrorCode::InvalidArgument, "dip fit needs distinct positions");

  // Width is confined to [min spacing, span] through a logistic map.
  const double w_lo = min_spacing;
  const double w_hi = std::max(span, 2.0 * min_spacing);
  auto width_of = [&](double z) { return w_lo + (w_hi - w_lo) / (1.0 + std::exp(-z)); };

  auto model = [&](const std::vector<double>& p, double x) {
    const double u = (x - p[2]) / width_of(p[3]);
    return p[0] * (1.0 - p[1] * std::exp(-0.5 * u * u));
  };
  // Poisson-weighted least squares.
  auto chi2 = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (const auto& pt : points) {
      const double c = static_cast<double>(pt.count);
      const double r = c - model(p, pt.position_um);
      s += r * r / std::max(c, 1.0);
    }
    return s;
  };

  // Initial guess: baseline from the largest counts, centre at the smallest.
  const auto [lo_it, hi_it] = std::minmax_element(
      points.begin(), points.end(), [](const DipPoint& a, const DipPoint& b) { return a.count < b.count; });
  std::vector<std::int64_t> sorted_counts;
  for (const auto& p : points) sorted_counts.push_back(p.count);
  std::sort(sorted_counts.begin(), sorted_counts.end());
  const std::size_t top = std::max<std::size_t>(1, sorted_counts.size() / 4);
  double baseline = 0.0;
  for (std::size_t i = sorted_counts.size() - top; i < sorted_counts.size(); ++i) {
    baseline += static_cast<double>(sorted_counts[i]);
  }
  baseline /= static_cast<double>(top);
  if (!(baseline > 0.0)) baseline = std::max(1.0, static_cast<double>(hi_it->count));
  const double depth = 1.0 - static_cast<double>(lo_it->count) / baseline;

  DipFit best;
  double best_chi2 = std::numeric_limits<double>::infinity();
  for (double width_fraction : {0.05, 0.15, 0.35}) {
    const double w0 = std::clamp(width_fraction * span, w_lo * 1.01, w_hi * 0.99);
    const double z0 = -std::log((w_hi - w_lo) / (w0 - w_lo) - 1.0);
    optimize::NelderMeadOptions opts;
    opts.initial_step = 0.2;
    opts.f_tolerance = 1e-10;
    std::vector<double> start{baseline, std::clamp(depth, 0.0, 1.0), lo_it->position_um, z0};
    // Baseline and centre steps are relative to their scales.
    const auto m = optimize::nelder_mead(chi2, start, opts);
    if (m.value < best_chi2) {
      best_chi2 = m.value;
      best = {m.x[0], m.x[1], m.x[2], width_of(m.x[3]), m.value};
    }
  }
  return best;
}

// ---------------------------------------------------------- preparation

GhzPreparation ghz_from_pairs() {
  // Modes ordered (1, 2, 3, 4).
  const PureState pairs = tensor_product(states::phi_plus(), states::phi_plus());

  // Parity check: photons in modes 2 and 3 leave through different ports only
  // when they share an H/V polarization.
  Vector filtered = pairs.amplitudes();
  for (Eigen::Index i = 0; i < filtered.size(); ++i) {
    const auto bits = static_cast<unsigned>(i);
    const unsigned mode2 = (bits >> 2U) & 1U;
    const unsigned mode3 = (bits >> 1U) & 1U;
    if (mode2 != mode3) filtered(i) = 0.0;
  }
  const double parity_probability = filtered.squaredNorm();
  const PureState after_pbs(filtered / std::sqrt(parity_probability));

  // PBS outputs: mode 2 -> A, mode 3 -> B. Reorder to (A, B, 1, 4).
  const std::array<int, 4> order{1, 2, 0, 3};
  const PureState four_photon = permute_qubits(after_pbs, order);

  const ProjectionOutcome triggered = project_qubit(four_photon, 3, states::d());
  return {triggered.state, four_photon, parity_probability, triggered.probability};
}

}  // namespace ghztomo
