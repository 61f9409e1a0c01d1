#include "ghztomo/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <memory>
#include <ostream>
#include <sstream>

#include "ghztomo/analysis.hpp"
#include "ghztomo/reconstruct.hpp"
#include "ghztomo/text_io.hpp"
#include "ghztomo/tomo_model.hpp"

namespace ghztomo::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulateConfig {
  std::string preset;
  double flux = 1e5;
  std::uint64_t seed = 1;
  std::string out;
  double duration_s = kDefaultDurationSeconds;
  double accidental_rate = 0.0;
  std::string accidental_file;
  double trigger_rate = 0.0;
  bool noiseless = false;
  int restarts = kDefaultRestarts;
};

struct ReconstructConfig {
  std::string in;
  std::string out;
  std::string method = "mle";
  std::string model = "poisson";
  int restarts = 5;
  std::uint64_t seed = 1;
  int max_iterations = 100000;
  double accidental_rate = -1.0;
  std::string accidental_file;
  bool normalize = false;
};

struct AnalyzeConfig {
  std::string in;
  std::string out;
  std::string counts;
  int trials = 0;
  int restarts = kDefaultRestarts;
  int mle_restarts = 5;
  std::uint64_t seed = 1;
};

struct DipCommandConfig {
  double epsilon0 = 0.69;
  double width_um = 30.0;
  std::string positions = "-200:200:41";
  double events = 2000.0;
  std::uint64_t seed = 1;
  std::string out;
};

double parse_number(std::string_view text, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError("invalid " + what + ": '" + std::string(text) + "'");
  }
  return v;
}

// "start:stop:count", evenly spaced and inclusive.
std::vector<double> parse_positions(const std::string& spec) {
  const auto first = spec.find(':');
  const auto second = spec.find(':', first == std::string::npos ? first : first + 1);
  if (first == std::string::npos || second == std::string::npos) {
    throw UsageError("positions must be start:stop:count");
  }
  const double start = parse_number(std::string_view(spec).substr(0, first), "positions start");
  const double stop = parse_number(std::string_view(spec).substr(first + 1, second - first - 1), "positions stop");
  const double count = parse_number(std::string_view(spec).substr(second + 1), "positions count");
  if (count != std::floor(count) || count < 1) throw UsageError("positions count must be a positive integer");
  const auto n = static_cast<std::size_t>(count);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = n == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

std::array<double, kSettings> read_rate_file(const std::string& path) {
  // One "setting rate" pair per line.
  const std::string text = text_io::read_file(path);
  std::array<double, kSettings> rates{};
  std::array<bool, kSettings> seen{};
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::istringstream words(line);
    std::string label;
    std::string value;
    if (!(words >> label) || label.front() == '#') continue;
    if (!(words >> value)) {
      throw TomoError(ErrorCode::Parse, path + ":" + std::to_string(number) + ": missing rate");
    }
    const AnalyzerSetting s = AnalyzerSetting::from_label(label);
    double rate = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), rate);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw TomoError(ErrorCode::Parse, path + ":" + std::to_string(number) + ": bad rate '" + value + "'");
    }
    rates[static_cast<std::size_t>(s.index())] = rate;
    seen[static_cast<std::size_t>(s.index())] = true;
  }
  for (int nu = 0; nu < kSettings; ++nu) {
    if (!seen[static_cast<std::size_t>(nu)]) {
      throw TomoError(ErrorCode::MissingData, path + ": no rate for " + AnalyzerSetting::from_index(nu).label());
    }
  }
  return rates;
}

std::optional<BackgroundModel> background_from(double flat_rate, const std::string& file) {
  if (!file.empty() && flat_rate >= 0.0) {
    throw UsageError("give either --accidental-rate or --accidental-file, not both");
  }
  if (!file.empty()) return BackgroundModel::per_setting(read_rate_file(file));
  if (flat_rate >= 0.0) {
    try {
      return BackgroundModel::flat(flat_rate);
    } catch (const TomoError& e) {
      throw UsageError(e.what());
    }
  }
  return std::nullopt;
}

DensityMatrix load_state(const std::string& path) {
  const auto stored = text_io::read_reconstruction(text_io::read_file(path));
  if (!stored.result.physical) {
    throw TomoError(ErrorCode::NotPhysical, "'" + path + "' holds an unphysical matrix (min eigenvalue " +
                                                text_io::format_real(stored.result.min_eigenvalue, 6) + ")");
  }
  // The stored matrix is rounded to 12 digits; restore exact Hermiticity and trace.
  return DensityMatrix::sanitize(stored.result.rho);
}

std::string quantities_summary(const AnalysisReport& r) {
  std::ostringstream os;
  os << "fidelity " << text_io::format_real(r.fidelity, 6) << '\n'
     << "witness_min " << text_io::format_real(r.witness.value, 6) << '\n'
     << "mermin_max " << text_io::format_real(r.mermin.value, 6) << '\n'
     << "concurrences " << text_io::format_real(r.concurrences[0], 6) << ' '
     << text_io::format_real(r.concurrences[1], 6) << ' ' << text_io::format_real(r.concurrences[2], 6) << '\n';
  return os.str();
}

std::string provenance(const CLI::App& sub) {
  std::string header = "ghztomo " + sub.get_name() + "\n";
  header += sub.config_to_str(true, false);
  while (!header.empty() && header.back() == '\n') header.pop_back();
  return header;
}

int cmd_simulate(const CLI::App& sub, const SimulateConfig& cfg, std::ostream& out) {
  if (!(cfg.flux > 0.0)) throw UsageError("--flux must be positive");
  const DensityMatrix rho = resolve_preset(cfg.preset);
  if (rho.qubit_count() != 3) throw TomoError(ErrorCode::DimensionMismatch, "preset is not a 3-qubit state");

  SimulationOptions options;
  options.duration_s = cfg.duration_s;
  options.trigger_rate_per_s = cfg.trigger_rate;
  if (!cfg.accidental_file.empty() && cfg.accidental_rate != 0.0) {
    throw UsageError("give either --accidental-rate or --accidental-file, not both");
  }
  if (auto bg = background_from(cfg.accidental_file.empty() ? cfg.accidental_rate : -1.0, cfg.accidental_file)) {
    options.background = *bg;
  }
  if (!(cfg.duration_s > 0.0) || cfg.trigger_rate < 0.0) throw UsageError("duration must be positive, trigger rate >= 0");
  const TomographySet set =
      cfg.noiseless ? expected_counts(rho, cfg.flux) : simulate_counts(rho, cfg.flux, cfg.seed, options);

  AnalysisOptions aopts;
  aopts.restarts = cfg.restarts;
  aopts.seed = cfg.seed;
  const AnalysisReport truth = full_report(rho, aopts);
  const std::string truth_text = quantities_summary(truth);

  text_io::write_file(cfg.out, text_io::write_counts(set, provenance(sub) + "\ntrue state:\n" + truth_text));
  out << "wrote " << set.records().size() << " settings to " << cfg.out << '\n'
      << "rectilinear total " << text_io::format_real(set.rectilinear_total(), 0) << '\n'
      << "true state:\n"
      << truth_text;
  return kSuccess;
}

int cmd_reconstruct(const CLI::App& sub, const ReconstructConfig& cfg, std::ostream& out) {
  TomographySet set = text_io::read_counts(text_io::read_file(cfg.in));
  if (auto bg = background_from(cfg.accidental_rate, cfg.accidental_file)) set = apply_background(set, *bg);
  if (cfg.normalize) set = normalize_by_trigger(set);

  MleOptions options;
  if (cfg.model == "poisson") {
    options.model = LikelihoodModel::Poisson;
  } else if (cfg.model == "gaussian") {
    options.model = LikelihoodModel::Gaussian;
  } else {
    throw UsageError("--model must be poisson or gaussian");
  }
  options.restarts = cfg.restarts;
  options.seed = cfg.seed;
  options.max_iterations = cfg.max_iterations;

  ReconstructionResult result;
  if (cfg.method == "linear") {
    result = linear_invert(set);
  } else if (cfg.method == "mle") {
    result = mle_reconstruct(set, options);
  } else {
    throw UsageError("--method must be mle or linear");
  }
  text_io::write_file(cfg.out, text_io::write_reconstruction(result, options.model, provenance(sub)));

  out << "method " << to_string(result.method) << '\n'
      << "physical " << (result.physical ? 1 : 0) << '\n'
      << "converged " << (result.converged ? 1 : 0) << '\n'
      << "flux " << text_io::format_real(result.flux, 6) << '\n';
  if (result.physical) {
    out << "fidelity " << text_io::format_real(ghz_fidelity(result.state()), 6) << '\n';
  }
  return result.converged ? kSuccess : kNotConverged;
}

int cmd_analyze(const CLI::App& sub, const AnalyzeConfig& cfg, std::ostream& out) {
  if (cfg.trials < 0) throw UsageError("--trials must be >= 0");
  if (cfg.trials == 1) throw UsageError("--trials must be 0 or at least 2");
  if (cfg.trials > 0 && cfg.counts.empty()) throw UsageError("--trials needs --counts");
  if (cfg.restarts < 1) throw UsageError("--restarts must be >= 1");

  const DensityMatrix rho = load_state(cfg.in);
  AnalysisOptions aopts;
  aopts.restarts = cfg.restarts;
  aopts.seed = cfg.seed;
  AnalysisReport report = full_report(rho, aopts);
  if (cfg.trials > 0) {
    const TomographySet set = text_io::read_counts(text_io::read_file(cfg.counts));
    MleOptions mopts;
    mopts.restarts = cfg.mle_restarts;
    mopts.seed = cfg.seed;
    report.uncertainties = monte_carlo(set, cfg.trials, cfg.seed, report_quantities(aopts), mopts);
  }
  const std::string text = text_io::write_report(report, provenance(sub));
  text_io::write_file(cfg.out, text);
  out << quantities_summary(report);
  if (report.uncertainties) {
    for (const auto& q : report.uncertainties->quantities) {
      out << q.name << " +/- " << text_io::format_real(q.stddev, 3) << '\n';
    }
  }
  return kSuccess;
}

int cmd_dip(const CLI::App& sub, const DipCommandConfig& cfg, std::ostream& out) {
  DipConfig dip;
  dip.epsilon0 = cfg.epsilon0;
  dip.width_um = cfg.width_um;
  dip.events_per_point = cfg.events;
  dip.positions_um = parse_positions(cfg.positions);
  if (dip.positions_um.size() < 5) throw UsageError("dip needs at least 5 positions");
  try {
    dip.validate();
  } catch (const TomoError& e) {
    throw UsageError(e.what());
  }
  const auto curve = dip_curve(dip, cfg.seed);
  const DipFit fit = fit_dip(curve);

  std::ostringstream os;
  os << text_io::comment_block(provenance(sub));
  os << "# position_um count expected\n";
  for (const auto& p : curve) {
    os << text_io::format_real(p.position_um, 0) << ' ' << p.count << ' ' << text_io::format_real(p.expected, 0)
       << '\n';
  }
  os << "# fitted_visibility " << text_io::format_real(fit.visibility, 6) << '\n'
     << "# fitted_baseline " << text_io::format_real(fit.baseline, 6) << '\n'
     << "# fitted_center_um " << text_io::format_real(fit.center_um, 6) << '\n'
     << "# fitted_width_um " << text_io::format_real(fit.width_um, 6) << '\n';
  text_io::write_file(cfg.out, os.str());
  out << "fitted_visibility " << text_io::format_real(fit.visibility, 6) << '\n';
  return kSuccess;
}

}  // namespace

DensityMatrix resolve_preset(const std::string& preset) {
  if (preset == "ghz") return DensityMatrix::from_pure(states::ghz(3));
  if (preset.rfind("werner:", 0) == 0) {
    const double p = parse_number(std::string_view(preset).substr(7), "werner weight");
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("werner weight must lie in [0,1]");
    return DensityMatrix::mixture(p, DensityMatrix::from_pure(states::ghz(3)), DensityMatrix::maximally_mixed(3));
  }
  if (preset.rfind("file:", 0) == 0) {
    const std::string path = preset.substr(5);
    if (path.empty()) throw UsageError("preset file: needs a path");
    return load_state(path);
  }
  throw UsageError("unknown preset '" + preset + "' (expected ghz, werner:<p> or file:<path>)");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Three-photon polarization state tomography"};
  app.set_config("--config", "", "TOML/INI file with option values; flags given on the command line win");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();
  app.require_subcommand(1);

  SimulateConfig sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Simulate the 64-setting count table for a preset state");
  simulate->add_option("--preset", sim.preset, "ghz | werner:<p> | file:<reconstruction file>")->required();
  simulate->add_option("--flux", sim.flux, "Expected events summed over the H/V-only settings")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output count table")->required();
  simulate->add_option("--duration", sim.duration_s, "Acquisition time per setting (s)")->capture_default_str();
  simulate->add_option("--accidental-rate", sim.accidental_rate, "Flat accidental rate (events/s)")->capture_default_str();
  simulate->add_option("--accidental-file", sim.accidental_file, "Per-setting accidental rates");
  simulate->add_option("--trigger-rate", sim.trigger_rate, "Trigger singles rate (events/s); 0 leaves singles unrecorded")
      ->capture_default_str();
  simulate->add_flag("--noiseless", sim.noiseless, "Write expected counts instead of Poisson samples");
  simulate->add_option("--restarts", sim.restarts, "Multistart count for the echoed true quantities")->capture_default_str();

  ReconstructConfig rec;
  CLI::App* reconstruct = app.add_subcommand("reconstruct", "Reconstruct the density matrix from a count table");
  reconstruct->add_option("--in", rec.in, "Count table")->required();
  reconstruct->add_option("--out", rec.out, "Output reconstruction file")->required();
  reconstruct->add_option("--method", rec.method, "mle | linear")->capture_default_str();
  reconstruct->add_option("--model", rec.model, "poisson | gaussian")->capture_default_str();
  reconstruct->add_option("--restarts", rec.restarts, "Random restarts in addition to the warm start")->capture_default_str();
  reconstruct->add_option("--seed", rec.seed, "Random seed for restarts")->capture_default_str();
  reconstruct->add_option("--max-iterations", rec.max_iterations, "Optimizer iteration cap")->capture_default_str();
  reconstruct->add_option("--accidental-rate", rec.accidental_rate, "Replace accidental estimates with a flat rate (events/s)");
  reconstruct->add_option("--accidental-file", rec.accidental_file, "Replace accidental estimates with per-setting rates");
  reconstruct->add_flag("--normalize", rec.normalize, "Scale counts by the squared trigger-singles ratio");

  AnalyzeConfig ana;
  CLI::App* analyze = app.add_subcommand("analyze", "Fidelity, witness, Mermin and concurrence of a reconstruction");
  analyze->add_option("--in", ana.in, "Reconstruction file")->required();
  analyze->add_option("--out", ana.out, "Output report")->required();
  analyze->add_option("--counts", ana.counts, "Count table for Monte-Carlo error bars");
  analyze->add_option("--trials", ana.trials, "Monte-Carlo trials (0 disables)")->capture_default_str();
  analyze->add_option("--restarts", ana.restarts, "Multistart count for witness and Mermin searches")->capture_default_str();
  analyze->add_option("--mle-restarts", ana.mle_restarts, "Random restarts per Monte-Carlo reconstruction")
      ->capture_default_str();
  analyze->add_option("--seed", ana.seed, "Random seed")->capture_default_str();

  DipCommandConfig dip;
  CLI::App* dipcmd = app.add_subcommand("dip", "Simulate and fit the four-fold interference dip");
  dipcmd->add_option("--epsilon0", dip.epsilon0, "Peak overlap at zero delay")->capture_default_str();
  dipcmd->add_option("--width", dip.width_um, "Gaussian width of the overlap (um)")->capture_default_str();
  dipcmd->add_option("--positions", dip.positions, "start:stop:count in um")->capture_default_str();
  dipcmd->add_option("--events", dip.events, "Baseline events per point")->capture_default_str();
  dipcmd->add_option("--seed", dip.seed, "Random seed")->capture_default_str();
  dipcmd->add_option("--out", dip.out, "Output curve file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(*simulate, sim, out);
    if (reconstruct->parsed()) return cmd_reconstruct(*reconstruct, rec, out);
    if (analyze->parsed()) return cmd_analyze(*analyze, ana, out);
    if (dipcmd->parsed()) return cmd_dip(*dipcmd, dip, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const TomoError& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidArgument ? kUsageError : kDataError;
  }
  return kUsageError;
}

}  // namespace ghztomo::cli
