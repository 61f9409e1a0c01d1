#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ghztomo/tomo_model.hpp"
#include "test_support.hpp"

using namespace ghztomo;
using ghztomo::testing::brute_force_ghz_probability;
using ghztomo::testing::random_density;

namespace {

DensityMatrix ghz_state() { return DensityMatrix::from_pure(states::ghz(3)); }

TomographySet flat_set(std::int64_t raw, double accidental, std::int64_t singles) {
  std::vector<TomographyRecord> records;
  for (int nu = 0; nu < kSettings; ++nu) {
    TomographyRecord r;
    r.setting = AnalyzerSetting::from_index(nu);
    r.raw_count = raw + nu;
    r.accidental_estimate = accidental;
    r.trigger_singles = singles;
    records.push_back(r);
  }
  return TomographySet(std::move(records));
}

}  // namespace

TEST_CASE("setting indices") {
  for (int nu = 0; nu < kSettings; ++nu) {
    const auto s = AnalyzerSetting::from_index(nu);
    const auto& l = s.labels();
    CHECK(nu == 16 * static_cast<int>(l[0]) + 4 * static_cast<int>(l[1]) + static_cast<int>(l[2]));
    CHECK(AnalyzerSetting::from_label(s.label()) == s);
  }
  CHECK(AnalyzerSetting::from_label("HVD").index() == 0 * 16 + 1 * 4 + 2);
  CHECK(AnalyzerSetting::from_label("RRR").index() == 63);
  CHECK_THROWS_AS(AnalyzerSetting::from_label("HVA"), TomoError);
  CHECK_THROWS_AS(AnalyzerSetting::from_label("HV"), TomoError);
  CHECK_THROWS_AS(AnalyzerSetting::from_index(64), TomoError);
}

TEST_CASE("projector") {
  SUBCASE("HHH") {
    Matrix expected = Matrix::Zero(8, 8);
    expected(0, 0) = 1.0;
    CHECK(max_abs_difference(projector(AnalyzerSetting::from_label("HHH")).entries(), expected) < 1e-15);
  }
  SUBCASE("DDD is uniform 1/8") {
    const Matrix p = projector(AnalyzerSetting::from_label("DDD")).entries();
    CHECK(max_abs_difference(p, Matrix::Constant(8, 8, 0.125)) < 1e-15);
  }
  SUBCASE("RRR on GHZ matches the hand expansion (1/8)") {
    const double oracle = brute_force_ghz_probability("RRR");
    CHECK(oracle == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(born_probability(ghz_state(), AnalyzerSetting::from_label("RRR")) == doctest::Approx(oracle).epsilon(1e-14));
  }
  SUBCASE("all projectors are idempotent rank-1") {
    for (int nu = 0; nu < kSettings; ++nu) {
      const Matrix p = projector(AnalyzerSetting::from_index(nu)).entries();
      CHECK(max_abs_difference(p * p, p) < 1e-12);
      CHECK(std::abs(p.trace() - Complex(1.0, 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("born_probability against the brute-force GHZ oracle") {
  const auto rho = ghz_state();
  for (int nu = 0; nu < kSettings; ++nu) {
    const auto s = AnalyzerSetting::from_index(nu);
    const std::string label = s.label();
    CHECK(born_probability(rho, s) == doctest::Approx(brute_force_ghz_probability(label.c_str())).epsilon(1e-13));
  }
  CHECK(born_probability(rho, AnalyzerSetting::from_label("HHH")) == doctest::Approx(0.5));
  CHECK(born_probability(rho, AnalyzerSetting::from_label("HHV")) < 1e-15);
  CHECK(born_probability(rho, AnalyzerSetting::from_label("DDD")) == doctest::Approx(0.25));
}

TEST_CASE("expected_count") {
  CHECK(expected_count(ghz_state(), AnalyzerSetting::from_label("VVV"), 932.0) == doctest::Approx(466.0));
  for (int nu = 0; nu < kSettings; ++nu) {
    const auto s = AnalyzerSetting::from_index(nu);
    if (s.is_rectilinear()) {
      CHECK(expected_count(DensityMatrix::maximally_mixed(3), s, 1000.0) == doctest::Approx(125.0));
    }
  }
  CHECK_THROWS_AS(expected_count(ghz_state(), AnalyzerSetting{}, 0.0), TomoError);
}

TEST_CASE("simulate_counts") {
  const auto set = simulate_counts(ghz_state(), 1e6, 7);
  const auto& hhh = set.at(AnalyzerSetting::from_label("HHH"));
  CHECK(std::abs(static_cast<double>(hhh.raw_count) - 5e5) < 5.0 * std::sqrt(5e5));
  CHECK(hhh.accidental_estimate == 0.0);

  const auto product = simulate_counts(DensityMatrix::from_pure(PureState::basis("HHH")), 1e4, 3);
  for (const char* label : {"VHH", "VHV", "VVH", "VVV", "HVH", "HHV"}) {
    CHECK(product.at(AnalyzerSetting::from_label(label)).raw_count == 0);
  }

  const auto a = simulate_counts(ghz_state(), 1e4, 1);
  const auto b = simulate_counts(ghz_state(), 1e4, 2);
  const auto a_again = simulate_counts(ghz_state(), 1e4, 1);
  bool differ = false;
  for (int nu = 0; nu < kSettings; ++nu) {
    const auto s = AnalyzerSetting::from_index(nu);
    differ = differ || a.at(s).raw_count != b.at(s).raw_count;
    CHECK(a.at(s).raw_count == a_again.at(s).raw_count);
  }
  CHECK(differ);
}

TEST_CASE("simulated rectilinear totals have mean equal to the flux") {
  const double flux = 2000.0;
  double sum = 0.0;
  const int seeds = 200;
  for (int seed = 0; seed < seeds; ++seed) {
    sum += simulate_counts(testing::werner(0.6), flux, static_cast<std::uint64_t>(seed)).rectilinear_total();
  }
  const double mean = sum / seeds;
  CHECK(std::abs(mean - flux) < 5.0 * std::sqrt(flux / seeds));
}

TEST_CASE("apply_background") {
  const auto set = flat_set(5, 0.0, 100);
  const auto unchanged = apply_background(set, BackgroundModel::flat(0.0));
  for (std::size_t i = 0; i < set.records().size(); ++i) {
    CHECK(unchanged.records()[i].corrected_count() == set.records()[i].corrected_count());
  }
  const auto with = apply_background(set, BackgroundModel::flat(0.01));
  for (const auto& r : with.records()) CHECK(r.accidental_estimate == doctest::Approx(9.0));
  // raw = 5 on setting 0, accidental 9
  CHECK(with.at(AnalyzerSetting::from_index(0)).corrected_count() == 0.0);
  CHECK(with.at(AnalyzerSetting::from_index(0)).background_subtracted() == doctest::Approx(-4.0));
  CHECK_THROWS_AS(BackgroundModel::flat(-1.0), TomoError);
}

TEST_CASE("normalize_by_trigger") {
  const auto set = flat_set(100, 0.0, 1000);
  const auto same = normalize_by_trigger(set);
  for (std::size_t i = 0; i < set.records().size(); ++i) {
    CHECK(same.records()[i].corrected_count() == doctest::Approx(set.records()[i].corrected_count()));
  }

  std::vector<TomographyRecord> records = set.records();
  for (auto& r : records) r.trigger_singles = 1000;
  records[0].trigger_singles = 2000;
  records[1].trigger_singles = 0;
  CHECK_THROWS_AS(normalize_by_trigger(TomographySet(records)), TomoError);
  records[1].trigger_singles = 1000;
  const auto scaled = normalize_by_trigger(TomographySet(records));
  // One doubled record: its factor relative to a typical record is 1/4.
  CHECK(scaled.records()[0].scale / scaled.records()[1].scale == doctest::Approx(0.25));
}

TEST_CASE("background subtraction and trigger normalization commute on flat inputs") {
  const auto set = flat_set(50, 0.0, 400);
  const auto model = BackgroundModel::flat(0.02);
  const auto one = normalize_by_trigger(apply_background(set, model));
  const auto two = apply_background(normalize_by_trigger(set), model);
  for (std::size_t i = 0; i < set.records().size(); ++i) {
    CHECK(std::abs(one.records()[i].corrected_count() - two.records()[i].corrected_count()) < 1e-10);
  }
}

TEST_CASE("tomography set validation") {
  std::vector<TomographyRecord> records = flat_set(1, 0.0, 0).records();
  records.pop_back();
  CHECK_THROWS_AS(TomographySet{records}, TomoError);
  records.push_back(records.front());
  try {
    TomographySet s(records);
    FAIL("duplicate accepted");
  } catch (const TomoError& e) {
    CHECK(std::string(e.what()).find("HHH") != std::string::npos);
  }
}

TEST_CASE("rectilinear settings form a complete basis") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rho = random_density(3, rng);
    double total = 0.0;
    for (int nu = 0; nu < kSettings; ++nu) {
      const auto s = AnalyzerSetting::from_index(nu);
      const double p = born_probability(rho, s);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      if (s.is_rectilinear()) total += p;
    }
    CHECK(std::abs(total - 1.0) < 1e-10);

    // Summing H and V on photon 1 marginalizes to the (A,B) reduction.
    const std::vector<int> keep{0, 1};
    const auto reduced = partial_trace(rho, keep);
    for (Polarization a : {Polarization::H, Polarization::V, Polarization::D, Polarization::R}) {
      for (Polarization b : {Polarization::H, Polarization::V, Polarization::D, Polarization::R}) {
        const double summed = born_probability(rho, AnalyzerSetting({a, b, Polarization::H})) +
                              born_probability(rho, AnalyzerSetting({a, b, Polarization::V}));
        const PureState ab = tensor_product(polarization_state(a), polarization_state(b));
        CHECK(std::abs(summed - fidelity_pure(reduced, ab)) < 1e-10);
      }
    }
  }
}

TEST_CASE("dip_state") {
  CHECK(max_abs_difference(dip_state(1.0).entries(), DensityMatrix::from_pure(states::phi_plus()).entries()) < 1e-15);
  Matrix half_mixed = Matrix::Zero(4, 4);
  half_mixed(0, 0) = 0.5;
  half_mixed(3, 3) = 0.5;
  CHECK(max_abs_difference(dip_state(0.0).entries(), half_mixed) < 1e-15);
  const PureState ad = tensor_product(states::a(), states::d());
  CHECK(fidelity_pure(dip_state(0.69), ad) == doctest::Approx(0.0775).epsilon(1e-14));
  CHECK_THROWS_AS(dip_state(1.5), TomoError);
}

TEST_CASE("dip_curve") {
  DipConfig cfg;
  cfg.width_um = 20.0;
  cfg.events_per_point = 1000.0;
  for (int i = 0; i <= 40; ++i) cfg.positions_um.push_back(-400.0 + 20.0 * i);

  for (double eps : {0.0, 0.3, 0.69, 1.0}) {
    cfg.epsilon0 = eps;
    CHECK(std::abs(noiseless_visibility(cfg) - eps) < 1e-12);
  }
  cfg.epsilon0 = 0.0;
  for (double x : cfg.positions_um) CHECK(dip_expected_count(cfg, x) == doctest::Approx(1000.0));
  cfg.epsilon0 = 0.69;
  CHECK(dip_expected_count(cfg, 1e6) == doctest::Approx(1000.0));
  CHECK(dip_expected_count(cfg, 0.0) == doctest::Approx(310.0));

  const auto c1 = dip_curve(cfg, 9);
  const auto c2 = dip_curve(cfg, 9);
  REQUIRE(c1.size() == cfg.positions_um.size());
  for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i].count == c2[i].count);
}

TEST_CASE("fit_dip") {
  DipConfig cfg;
  cfg.epsilon0 = 0.69;
  cfg.width_um = 30.0;
  cfg.events_per_point = 1e6;
  for (int i = 0; i < 41; ++i) cfg.positions_um.push_back(-200.0 + 10.0 * i);
  const auto fit = fit_dip(dip_curve(cfg, 4));
  CHECK(std::abs(fit.visibility - 0.69) < 0.02);
  CHECK(std::abs(fit.width_um - 30.0) < 3.0);

  cfg.epsilon0 = 0.0;
  CHECK(std::abs(fit_dip(dip_curve(cfg, 4)).visibility) < 0.02);

  std::vector<DipPoint> few(3);
  CHECK_THROWS_AS(fit_dip(few), TomoError);
}

TEST_CASE("ghz_from_pairs") {
  const auto prep = ghz_from_pairs();
  CHECK(fidelity_pure(DensityMatrix::from_pure(prep.ghz), states::ghz(3)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(prep.parity_check_probability == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(prep.trigger_probability == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(fidelity_pure(DensityMatrix::from_pure(prep.four_photon), states::ghz(4)) == doctest::Approx(1.0));
}
