#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "ghztomo/analysis.hpp"
#include "ghztomo/cli.hpp"
#include "ghztomo/text_io.hpp"

using namespace ghztomo;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "ghztomo_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

// Value following `key` at the start of a line in `text`.
double value_of(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    std::string first;
    words >> first;
    if (first == key) {
      double v = NAN;
      words >> v;
      return v;
    }
  }
  FAIL("key not found: " << key);
  return NAN;
}

std::string write_ideal_ghz(const std::string& name) {
  ReconstructionResult r;
  r.method = Method::Mle;
  r.rho = DensityMatrix::from_pure(states::ghz(3)).entries();
  r.flux = 1.0;
  r.converged = true;
  r.physical = true;
  const std::string p = path(name);
  text_io::write_file(p, text_io::write_reconstruction(r, LikelihoodModel::Poisson));
  return p;
}

}  // namespace

// -------------------------------------------------------------- simulate

TEST_CASE("simulate ghz writes 64 rows with the requested flux") {
  const auto r = run({"simulate", "--preset", "ghz", "--flux", "1e5", "--seed", "1", "--out", path("ghz.txt")});
  REQUIRE(r.code == cli::kSuccess);
  const TomographySet set = text_io::read_counts(text_io::read_file(path("ghz.txt")));
  CHECK(set.records().size() == 64);
  CHECK(std::abs(set.rectilinear_total() - 1e5) < 5.0 * std::sqrt(1e5));
}

TEST_CASE("simulate echoes the true quantities of the preset") {
  const auto r = run({"simulate", "--preset", "werner:0.735", "--flux", "1000", "--out", path("w.txt"),
                      "--restarts", "4"});
  REQUIRE(r.code == cli::kSuccess);
  CHECK(std::abs(value_of(r.out, "fidelity") - 0.768) <= 0.001);
  CHECK(text_io::read_file(path("w.txt")).find("# fidelity 7.68125e-01") != std::string::npos);
}

TEST_CASE("simulate rejects bad presets") {
  CHECK(run({"simulate", "--preset", "file:" + path("does_not_exist.txt"), "--out", path("x.txt")}).code ==
        cli::kDataError);
  CHECK(run({"simulate", "--preset", "bell", "--out", path("x.txt")}).code == cli::kUsageError);
  CHECK(run({"simulate", "--preset", "werner:1.5", "--out", path("x.txt")}).code == cli::kUsageError);
  CHECK(run({"simulate", "--preset", "ghz", "--out", path("x.txt"), "--accidental-rate", "1", "--accidental-file",
             path("r.txt")})
            .code == cli::kUsageError);
}

TEST_CASE("simulate accepts a reconstruction file as the preset") {
  const std::string ideal = write_ideal_ghz("ideal_preset.txt");
  const auto r = run({"simulate", "--preset", "file:" + ideal, "--out", path("from_file.txt"), "--restarts", "2"});
  CHECK(r.code == cli::kSuccess);
  CHECK(value_of(r.out, "fidelity") == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("unknown options and missing subcommands are usage errors") {
  CHECK(run({}).code == cli::kUsageError);
  CHECK(run({"simulate", "--preset", "ghz", "--out", path("x.txt"), "--bogus", "1"}).code == cli::kUsageError);
  CHECK(run({"frobnicate"}).code == cli::kUsageError);
  CHECK(run({"--help"}).code == cli::kSuccess);
}

// ---------------------------------------------------------------- config

TEST_CASE("config files supply options, flags override them, unknown keys fail") {
  const std::string cfg = path("sim.toml");
  text_io::write_file(cfg, "[simulate]\npreset=\"ghz\"\nflux=2000\nseed=4\nout=\"" + path("cfg_out.txt") + "\"\n");
  const auto a = run({"simulate", "--config", cfg, "--restarts", "2"});
  REQUIRE(a.code == cli::kSuccess);
  const std::string from_file = text_io::read_file(path("cfg_out.txt"));
  CHECK(from_file.find("# flux=2000") != std::string::npos);

  const auto b = run({"simulate", "--config", cfg, "--flux", "3000", "--restarts", "2"});
  REQUIRE(b.code == cli::kSuccess);
  CHECK(text_io::read_file(path("cfg_out.txt")).find("# flux=3000") != std::string::npos);

  const std::string bad = path("bad.toml");
  text_io::write_file(bad, "[simulate]\npreset=\"ghz\"\nout=\"" + path("cfg_out.txt") + "\"\nwibble=3\n");
  CHECK(run({"simulate", "--config", bad}).code == cli::kUsageError);
}

// ----------------------------------------------------------- reconstruct

TEST_CASE("simulate then reconstruct recovers GHZ") {
  REQUIRE(run({"simulate", "--preset", "ghz", "--flux", "1e5", "--seed", "2", "--out", path("g2.txt"), "--restarts",
               "2"})
              .code == cli::kSuccess);
  const auto r = run({"reconstruct", "--in", path("g2.txt"), "--out", path("g2.rho")});
  REQUIRE(r.code == cli::kSuccess);
  CHECK(value_of(r.out, "fidelity") >= 0.99);
  const auto stored = text_io::read_reconstruction(text_io::read_file(path("g2.rho")));
  CHECK(stored.result.physical);
}

TEST_CASE("linear reconstruction of noiseless counts is physical") {
  REQUIRE(run({"simulate", "--preset", "werner:0.6", "--noiseless", "--out", path("nl.txt"), "--restarts", "2"})
              .code == cli::kSuccess);
  const auto r = run({"reconstruct", "--in", path("nl.txt"), "--out", path("nl.rho"), "--method", "linear"});
  CHECK(r.code == cli::kSuccess);
  CHECK(value_of(r.out, "physical") == 1.0);
}

TEST_CASE("reconstruct reports data errors") {
  REQUIRE(run({"simulate", "--preset", "ghz", "--flux", "500", "--out", path("small.txt"), "--restarts", "2"}).code ==
          cli::kSuccess);
  std::string text = text_io::read_file(path("small.txt"));
  const auto start = text.find("HVD ");
  const std::string row = text.substr(start, text.find('\n', start) + 1 - start);
  text_io::write_file(path("dup.txt"), text + row);
  const auto dup = run({"reconstruct", "--in", path("dup.txt"), "--out", path("dup.rho")});
  CHECK(dup.code == cli::kDataError);
  CHECK(dup.err.find("HVD") != std::string::npos);

  std::string broken = text;
  broken.replace(start, 3, "HVX");
  const auto absent = run({"reconstruct", "--in", path("absent.txt"), "--out", path("b.rho")});
  CHECK(absent.code == cli::kDataError);
  text_io::write_file(path("broken.txt"), broken);
  const auto parse = run({"reconstruct", "--in", path("broken.txt"), "--out", path("b.rho")});
  CHECK(parse.code == cli::kDataError);
  CHECK(parse.err.find("line") != std::string::npos);

  CHECK(run({"reconstruct", "--in", path("small.txt"), "--out", path("s.rho"), "--method", "bayes"}).code ==
        cli::kUsageError);
}

TEST_CASE("reconstruct signals non-convergence with exit status 3") {
  const auto r = run({"reconstruct", "--in", path("small.txt"), "--out", path("nc.rho"), "--max-iterations", "2",
                      "--restarts", "0"});
  CHECK(r.code == cli::kNotConverged);
  CHECK(fs::exists(path("nc.rho")));
}

// --------------------------------------------------------------- analyze

TEST_CASE("analyze an ideal GHZ matrix") {
  const std::string ideal = write_ideal_ghz("ideal.rho");
  const auto r = run({"analyze", "--in", ideal, "--out", path("ideal.report")});
  REQUIRE(r.code == cli::kSuccess);
  const std::string report = text_io::read_file(path("ideal.report"));
  CHECK(value_of(report, "fidelity") == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(value_of(report, "witness_min") == doctest::Approx(-0.25).epsilon(1e-5));
  CHECK(value_of(report, "mermin_max") == doctest::Approx(4.0).epsilon(1e-5));
}

TEST_CASE("analyze with Monte-Carlo trials attaches nonzero error bars") {
  REQUIRE(run({"simulate", "--preset", "werner:0.735", "--flux", "930", "--seed", "5", "--out", path("ps.txt"),
               "--restarts", "2"})
              .code == cli::kSuccess);
  REQUIRE(run({"reconstruct", "--in", path("ps.txt"), "--out", path("ps.rho")}).code == cli::kSuccess);
  const auto r = run({"analyze", "--in", path("ps.rho"), "--out", path("ps.report"), "--counts", path("ps.txt"),
                      "--trials", "100", "--restarts", "4", "--mle-restarts", "1"});
  REQUIRE(r.code == cli::kSuccess);
  const AnalysisReport report = text_io::read_report(text_io::read_file(path("ps.report")));
  REQUIRE(report.uncertainties.has_value());
  CHECK(report.uncertainties->trial_count == 100);
  CHECK(report.uncertainties->quantities.size() == 6);
  for (const auto& q : report.uncertainties->quantities) {
    if (q.name.rfind("concurrence", 0) == 0) continue;  // may sit at the zero floor in every trial
    CHECK(q.stddev > 0.0);
  }
}

TEST_CASE("analyze rejects corrupt input and bad trial counts") {
  text_io::write_file(path("corrupt.rho"), "method mle\nrho\n1 0\n");
  CHECK(run({"analyze", "--in", path("corrupt.rho"), "--out", path("c.report")}).code == cli::kDataError);
  CHECK(run({"analyze", "--in", path("ps.rho"), "--out", path("c.report"), "--trials", "1", "--counts",
             path("ps.txt")})
            .code == cli::kUsageError);
  CHECK(run({"analyze", "--in", path("ps.rho"), "--out", path("c.report"), "--trials", "5"}).code ==
        cli::kUsageError);
}

// ------------------------------------------------------------------- dip

TEST_CASE("dip recovers the configured visibility") {
  const auto r = run({"dip", "--epsilon0", "0.69", "--positions", "-200:200:41", "--events", "20000", "--out",
                      path("dip.txt")});
  REQUIRE(r.code == cli::kSuccess);
  CHECK(std::abs(value_of(r.out, "fitted_visibility") - 0.69) <= 0.02);
  const auto flat = run({"dip", "--epsilon0", "0", "--positions", "-200:200:41", "--events", "20000", "--out",
                         path("dip0.txt")});
  REQUIRE(flat.code == cli::kSuccess);
  CHECK(std::abs(value_of(flat.out, "fitted_visibility")) <= 0.02);
}

TEST_CASE("dip needs at least five positions") {
  CHECK(run({"dip", "--positions", "-10:10:3", "--out", path("d3.txt")}).code == cli::kUsageError);
  CHECK(run({"dip", "--positions", "nonsense", "--out", path("d3.txt")}).code == cli::kUsageError);
}

// ------------------------------------------------------------ pipeline

TEST_CASE("the composed pipeline exits cleanly on every preset") {
  const std::string ideal = write_ideal_ghz("pipe_ideal.rho");
  for (const std::string& preset : std::vector<std::string>{"ghz", "werner:0.735", "werner:0", "file:" + ideal}) {
    CAPTURE(preset);
    CHECK(run({"simulate", "--preset", preset, "--flux", "5000", "--out", path("p.txt"), "--restarts", "2"}).code ==
          0);
    CHECK(run({"reconstruct", "--in", path("p.txt"), "--out", path("p.rho")}).code == 0);
    CHECK(run({"analyze", "--in", path("p.rho"), "--out", path("p.report"), "--restarts", "4"}).code == 0);
  }
}

TEST_CASE("repeated runs give byte-identical files") {
  REQUIRE(run({"dip", "--seed", "9", "--out", path("det.txt")}).code == 0);
  const std::string first = text_io::read_file(path("det.txt"));
  REQUIRE(run({"dip", "--seed", "9", "--out", path("det.txt")}).code == 0);
  CHECK(text_io::read_file(path("det.txt")) == first);
}
