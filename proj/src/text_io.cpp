#include "ghztomo/text_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace ghztomo::text_io {

namespace {

constexpr int kMatrixDigits = 12;
constexpr int kReportDigits = 6;

std::vector<std::string_view> split_words(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

struct Line {
  int number = 0;
  std::vector<std::string_view> words;
};

// Non-comment, non-blank lines with their 1-based line numbers.
std::vector<Line> content_lines(std::string_view text) {
  std::vector<Line> out;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    ++number;
    const std::string_view line = text.substr(pos, end - pos);
    auto words = split_words(line);
    if (!words.empty() && words.front().front() != '#') out.push_back({number, std::move(words)});
    if (end == text.size()) break;
    pos = end + 1;
  }
  return out;
}

[[noreturn]] void parse_error(int line, const std::string& message) {
  throw TomoError(ErrorCode::Parse, "line " + std::to_string(line) + ": " + message);
}

double parse_real(std::string_view word, int line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), value);
  if (ec != std::errc() || ptr != word.data() + word.size()) {
    parse_error(line, "expected a number, got '" + std::string(word) + "'");
  }
  return value;
}

std::int64_t parse_integer(std::string_view word, int line) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), value);
  if (ec != std::errc() || ptr != word.data() + word.size()) {
    parse_error(line, "expected an integer, got '" + std::string(word) + "'");
  }
  return value;
}

// Keyword lines of the form "key value..." collected until `stop` (if any).
class KeywordTable {
 public:
  void add(const Line& l) {
    const std::string key(l.words.front());
    if (entries_.count(key) != 0U) parse_error(l.number, "duplicate key '" + key + "'");
    entries_.emplace(key, l);
  }

  const Line& line(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw TomoError(ErrorCode::Parse, "missing key '" + key + "'");
    return it->second;
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0U; }

  std::string_view word(const std::string& key) const {
    const Line& l = line(key);
    if (l.words.size() != 2) parse_error(l.number, "'" + key + "' takes one value");
    return l.words[1];
  }

  double real(const std::string& key) const { return parse_real(word(key), line(key).number); }
  std::int64_t integer(const std::string& key) const { return parse_integer(word(key), line(key).number); }

  bool flag(const std::string& key) const {
    const std::int64_t v = integer(key);
    if (v != 0 && v != 1) parse_error(line(key).number, "'" + key + "' must be 0 or 1");
    return v == 1;
  }

  std::vector<double> reals(const std::string& key, std::size_t count) const {
    const Line& l = line(key);
    if (l.words.size() != count + 1) {
      parse_error(l.number, "'" + key + "' takes " + std::to_string(count) + " values");
    }
    std::vector<double> out;
    for (std::size_t i = 1; i < l.words.size(); ++i) out.push_back(parse_real(l.words[i], l.number));
    return out;
  }

 private:
  std::map<std::string, Line> entries_;
};

}  // namespace

std::string format_real(double value, int significant_digits) {
  char buf[64];
  if (significant_digits <= 0) {
    std::snprintf(buf, sizeof buf, "%.17g", value);
  } else {
    std::snprintf(buf, sizeof buf, "%.*e", significant_digits - 1, value);
  }
  return buf;
}

std::string comment_block(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    out += "# ";
    out += text.substr(pos, end - pos);
    out += '\n';
    pos = end + 1;
  }
  return out;
}

// ------------------------------------------------------------ counts

std::string write_counts(const TomographySet& set, std::string_view header) {
  std::ostringstream os;
  os << comment_block(header);
  os << "# setting raw_count duration_s trigger_singles accidental_estimate scale\n";
  for (const auto& r : set.records()) {
    os << r.setting.label() << ' ' << r.raw_count << ' ' << format_real(r.duration_s, 0) << ' '
       << r.trigger_singles << ' ' << format_real(r.accidental_estimate, 0) << ' '
       << format_real(r.scale, 0) << '\n';
  }
  return os.str();
}

TomographySet read_counts(std::string_view text) {
  std::vector<TomographyRecord> records;
  for (const Line& l : content_lines(text)) {
    if (l.words.size() != 6) parse_error(l.number, "expected 6 columns");
    TomographyRecord r;
    try {
      r.setting = AnalyzerSetting::from_label(l.words[0]);
    } catch (const TomoError& e) {
      parse_error(l.number, e.what());
    }
    r.raw_count = parse_integer(l.words[1], l.number);
    r.duration_s = parse_real(l.words[2], l.number);
    r.trigger_singles = parse_integer(l.words[3], l.number);
    r.accidental_estimate = parse_real(l.words[4], l.number);
    r.scale = parse_real(l.words[5], l.number);
    if (r.raw_count < 0 || r.trigger_singles < 0 || !(r.duration_s > 0.0) ||
        !(r.accidental_estimate >= 0.0) || !(r.scale > 0.0)) {
      parse_error(l.number, "value out of range for setting " + r.setting.label());
    }
    records.push_back(r);
  }
  return TomographySet(std::move(records));
}

// ---------------------------------------------------- reconstruction

std::string write_reconstruction(const ReconstructionResult& result, LikelihoodModel model,
                                 std::string_view header) {
  std::ostringstream os;
  os << comment_block(header);
  os << "method " << to_string(result.method) << '\n';
  os << "model " << to_string(model) << '\n';
  os << "converged " << (result.converged ? 1 : 0) << '\n';
  os << "physical " << (result.physical ? 1 : 0) << '\n';
  os << "iterations " << result.iterations << '\n';
  os << "flux " << format_real(result.flux, kMatrixDigits) << '\n';
  os << "log_likelihood " << format_real(result.log_likelihood, kMatrixDigits) << '\n';
  os << "min_eigenvalue " << format_real(result.min_eigenvalue, kMatrixDigits) << '\n';
  os << "rho\n";
  for (Eigen::Index i = 0; i < result.rho.rows(); ++i) {
    for (Eigen::Index j = 0; j < result.rho.cols(); ++j) {
      os << format_real(result.rho(i, j).real(), kMatrixDigits) << ' '
         << format_real(result.rho(i, j).imag(), kMatrixDigits) << '\n';
    }
  }
  return os.str();
}

StoredReconstruction read_reconstruction(std::string_view text) {
  const std::vector<Line> lines = content_lines(text);
  KeywordTable table;
  std::size_t i = 0;
  for (; i < lines.size() && lines[i].words.front() != "rho"; ++i) table.add(lines[i]);
  if (i == lines.size()) throw TomoError(ErrorCode::Parse, "missing 'rho' block");
  ++i;
  const std::size_t entries = lines.size() - i;
  if (entries != 64) {
    throw TomoError(ErrorCode::Parse, "expected 64 matrix entries, found " + std::to_string(entries));
  }

  StoredReconstruction stored;
  ReconstructionResult& r = stored.result;
  const std::string_view method = table.word("method");
  if (method == "mle") {
    r.method = Method::Mle;
  } else if (method == "linear") {
    r.method = Method::Linear;
  } else {
    parse_error(table.line("method").number, "unknown method '" + std::string(method) + "'");
  }
  const std::string_view model = table.word("model");
  if (model == "poisson") {
    stored.model = LikelihoodModel::Poisson;
  } else if (model == "gaussian") {
    stored.model = LikelihoodModel::Gaussian;
  } else {
    parse_error(table.line("model").number, "unknown model '" + std::string(model) + "'");
  }
  r.converged = table.flag("converged");
  r.physical = table.flag("physical");
  r.iterations = static_cast<int>(table.integer("iterations"));
  r.flux = table.real("flux");
  r.log_likelihood = table.real("log_likelihood");
  r.min_eigenvalue = table.real("min_eigenvalue");

  r.rho = Matrix(8, 8);
  for (std::size_t k = 0; k < 64; ++k, ++i) {
    const Line& l = lines[i];
    if (l.words.size() != 2) parse_error(l.number, "matrix entries need a real and an imaginary part");
    r.rho(static_cast<Eigen::Index>(k / 8), static_cast<Eigen::Index>(k % 8)) =
        Complex{parse_real(l.words[0], l.number), parse_real(l.words[1], l.number)};
  }
  return stored;
}

// ------------------------------------------------------------ report

std::string write_report(const AnalysisReport& report, std::string_view header) {
  std::ostringstream os;
  auto real = [](double v) { return format_real(v, kReportDigits); };
  os << comment_block(header);
  os << "fidelity " << real(report.fidelity) << '\n';
  os << "witness_min " << real(report.witness.value) << '\n';
  os << "witness_angles";
  for (double a : report.witness.optimal_unitary.angles()) os << ' ' << real(a);
  os << '\n';
  os << "witness_restarts " << report.witness.restarts_used << '\n';
  os << "mermin_max " << real(report.mermin.value) << '\n';
  os << "mermin_settings";
  const auto& s = report.mermin.settings;
  for (const BlochMeasurement* m : {&s.a, &s.a_prime, &s.b, &s.b_prime, &s.c, &s.c_prime}) {
    os << ' ' << real(m->theta) << ' ' << real(m->phi);
  }
  os << '\n';
  os << "mermin_restarts " << report.mermin.restarts_used << '\n';
  os << "mermin_violates_local_realism " << (report.mermin.violates_local_realism() ? 1 : 0) << '\n';
  os << "concurrence_B1 " << real(report.concurrences[0]) << '\n';
  os << "concurrence_A1 " << real(report.concurrences[1]) << '\n';
  os << "concurrence_AB " << real(report.concurrences[2]) << '\n';
  if (report.uncertainties) {
    os << "mc_trials " << report.uncertainties->trial_count << '\n';
    for (const auto& q : report.uncertainties->quantities) {
      os << "uncertainty " << q.name << ' ' << real(q.mean) << ' ' << real(q.stddev) << '\n';
    }
  }
  return os.str();
}

AnalysisReport read_report(std::string_view text) {
  KeywordTable table;
  MonteCarloSummary mc;
  for (const Line& l : content_lines(text)) {
    if (l.words.front() == "uncertainty") {
      if (l.words.size() != 4) parse_error(l.number, "uncertainty lines need name, mean, stddev");
      mc.quantities.push_back(
          {std::string(l.words[1]), parse_real(l.words[2], l.number), parse_real(l.words[3], l.number)});
    } else {
      table.add(l);
    }
  }
  AnalysisReport report;
  report.fidelity = table.real("fidelity");
  report.witness.value = table.real("witness_min");
  const auto angles = table.reals("witness_angles", 9);
  report.witness.optimal_unitary = LocalUnitary(3, angles);
  report.witness.restarts_used = static_cast<int>(table.integer("witness_restarts"));
  report.mermin.value = table.real("mermin_max");
  const auto m = table.reals("mermin_settings", 12);
  report.mermin.settings = {{m[0], m[1]}, {m[2], m[3]}, {m[4], m[5]}, {m[6], m[7]}, {m[8], m[9]}, {m[10], m[11]}};
  report.mermin.restarts_used = static_cast<int>(table.integer("mermin_restarts"));
  if (table.flag("mermin_violates_local_realism") != report.mermin.violates_local_realism()) {
    parse_error(table.line("mermin_violates_local_realism").number, "flag disagrees with mermin_max");
  }
  report.concurrences = {table.real("concurrence_B1"), table.real("concurrence_A1"),
                         table.real("concurrence_AB")};
  if (table.has("mc_trials")) {
    mc.trial_count = static_cast<int>(table.integer("mc_trials"));
    report.uncertainties = std::move(mc);
  } else if (!mc.quantities.empty()) {
    throw TomoError(ErrorCode::Parse, "uncertainty lines without mc_trials");
  }
  return report;
}

// ------------------------------------------------------------- files

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TomoError(ErrorCode::MissingData, "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TomoError(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
  out << contents;
  if (!out) throw TomoError(ErrorCode::InvalidArgument, "write to '" + path + "' failed");
}

}  // namespace ghztomo::text_io
