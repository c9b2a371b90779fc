#include "rmt/experiments.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

using namespace rmt;

namespace {

std::vector<Complex> uniform_disc(std::size_t k, std::uint64_t seed) {
  RandomStream s(seed, 0);
  std::vector<Complex> out;
  while (out.size() < k) {
    const Complex z(2 * s.uniform() - 1, 2 * s.uniform() - 1);
    if (std::abs(z) <= 1) out.push_back(z);
  }
  return out;
}

// Midpoint-rule area of a rectangle intersected with the unit disc.
double disc_area_grid(double x0, double x1, double y0, double y1, int m = 800) {
  const double hx = (x1 - x0) / m, hy = (y1 - y0) / m;
  long inside = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double x = x0 + (i + 0.5) * hx, y = y0 + (j + 0.5) * hy;
      inside += x * x + y * y <= 1;
    }
  return inside * hx * hy;
}

}  // namespace

TEST(LogGrid, Endpoints) {
  const auto g = log_grid(1e-4, 1e-1, 4);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(g.front(), 1e-4);
  EXPECT_EQ(g.back(), 1e-1);
  EXPECT_NEAR(g[1], 1e-3, 1e-15);
  EXPECT_THROW(log_grid(0, 1, 3), Error);
}

TEST(ShiftSpec, ParseAndBuild) {
  EXPECT_EQ(ShiftSpec::parse("zero").kind, ShiftSpec::Kind::Zero);
  EXPECT_DOUBLE_EQ(ShiftSpec::parse("diag:2").scale, 2.0);
  EXPECT_THROW(ShiftSpec::parse("diag:x"), Error);
  EXPECT_THROW(ShiftSpec::parse("ones"), Error);
  const auto m = make_shift(ShiftSpec::parse("diag"), 16);
  EXPECT_NEAR(m(3, 3).real(), 0.5 * std::pow(16.0, 0.51), 1e-12);
  EXPECT_EQ(m(0, 1), Complex(0));
}

TEST(ShiftSpec, ReadsMatrixFile) {
  const auto path = std::filesystem::temp_directory_path() / "rmt_shift_test.txt";
  write_text(path, "# comment\n1 0\n0 2+1i\n");
  const auto m = make_shift(ShiftSpec::parse("file:" + path.string()), 2);
  EXPECT_EQ(m(1, 1), Complex(2, 1));
  EXPECT_EQ(m(0, 0), Complex(1, 0));
  EXPECT_THROW(make_shift(ShiftSpec::parse("file:" + path.string()), 3), Error);
  std::filesystem::remove(path);
}

TEST(TailCurve, CountsMatchDirectCount) {
  const std::vector<double> s{0.5, 0.01, 0.2, std::nan(""), 0.001, 0.05};
  const std::vector<double> eta{0.0, 0.001, 0.01, 0.1, 1.0};
  const auto c = tail_curve(s, eta, 4, 1e-3, 1, 1);
  EXPECT_EQ(c.failures, 1u);
  EXPECT_EQ(c.trials_used, 5u);
  std::vector<std::uint64_t> counts;
  for (const auto& p : c.points) counts.push_back(p.count);
  EXPECT_EQ(counts, (std::vector<std::uint64_t>{0, 1, 2, 3, 5}));
  EXPECT_EQ(c.points[0].probability, 0.0);
  EXPECT_TRUE(c.monotone());
  // largest p / (n^{5/2} eta): 0.2 / (32 * 0.001)
  EXPECT_NEAR(c.envelope_c, 0.2 / (32 * 0.001), 1e-12);
  EXPECT_THROW(tail_curve(s, {0.1, 0.01}, 4, 1e-3, 1, 1), Error);
}

TEST(TailExperiment, MonotoneAndDeterministic) {
  TailConfig cfg;
  cfg.n = 8;
  cfg.trials = 300;
  cfg.seed = 5;
  cfg.eta = {0.0, 1e-3, 1e-2, 1e-1, 1.0};
  const auto a = tail_experiment(cfg);
  EXPECT_EQ(a.curve.points[0].count, 0u);
  EXPECT_TRUE(a.curve.monotone());
  EXPECT_EQ(a.curve.trials_used + a.curve.failures, 300u);
  cfg.threads = 3;
  const auto b = tail_experiment(cfg);
  EXPECT_EQ(to_jsonl(a.records), to_jsonl(b.records));
  cfg.seed = 6;
  EXPECT_NE(to_jsonl(a.records), to_jsonl(tail_experiment(cfg).records));
}

TEST(TailExperiment, RequiresSeed) {
  TailConfig cfg;
  cfg.n = 4;
  cfg.trials = 10;
  EXPECT_THROW(tail_experiment(cfg), Error);
}

TEST(SingleVector, HugeThresholdAlwaysHits) {
  SingleVectorConfig cfg;
  cfg.ns = {4, 8};
  cfg.c = 100;
  cfg.trials = 500;
  cfg.seed = 1;
  const auto r = single_vector_experiment(cfg);
  for (const auto& p : r.points) EXPECT_EQ(p.q, 1.0);
}

TEST(SingleVector, DifferenceVectorMatchesExactProbability) {
  // N (e1 - e2) / sqrt2 vanishes iff the first two columns agree: q_n = 2^{-n}
  SingleVectorConfig cfg;
  cfg.ns = {2, 4, 6};
  cfg.trials = 40000;
  cfg.seed = 2;
  const auto r = single_vector_experiment(cfg);
  for (const auto& p : r.points) {
    const double truth = std::ldexp(1.0, -int(p.n));
    EXPECT_LE(p.ci.lo, truth) << p.n;
    EXPECT_GE(p.ci.hi, truth) << p.n;
  }
  ASSERT_TRUE(r.fit);
  EXPECT_NEAR(r.fit->slope, -std::numbers::ln2, 0.1);
}

TEST(SingleVector, DeterministicAcrossThreads) {
  SingleVectorConfig cfg;
  cfg.ns = {3, 5};
  cfg.trials = 2000;
  cfg.seed = 9;
  cfg.threads = 1;
  const auto a = to_jsonl(single_vector_experiment(cfg).records);
  cfg.threads = 4;
  EXPECT_EQ(a, to_jsonl(single_vector_experiment(cfg).records));
}

TEST(Esd, RectDiscAreaAgainstGrid) {
  EXPECT_NEAR(rect_disc_area(-1, 1, -1, 1), std::numbers::pi, 1e-12);
  EXPECT_NEAR(rect_disc_area(0, 1, 0, 1), std::numbers::pi / 4, 1e-12);
  EXPECT_NEAR(rect_disc_area(-1.5, 1.5, -1.5, 1.5), std::numbers::pi, 1e-12);
  EXPECT_EQ(rect_disc_area(1.1, 1.4, 0, 0.3), 0.0);
  RandomStream s(4, 0);
  for (int t = 0; t < 10; ++t) {
    const double x0 = 3 * s.uniform() - 1.5, y0 = 3 * s.uniform() - 1.5;
    const double x1 = x0 + s.uniform(), y1 = y0 + s.uniform();
    EXPECT_NEAR(rect_disc_area(x0, x1, y0, y1), disc_area_grid(x0, x1, y0, y1), 2e-4) << t;
  }
}

TEST(Esd, UniformDiscHasSmallDiscrepancy) {
  const auto pts = uniform_disc(20000, 3);
  const auto h = esd_from_points(pts);
  EXPECT_LE(h.discrepancy, 0.05);
  EXPECT_EQ(h.outside, 0u);
  // F(r) = r^2 for the uniform disc; r = 0.5 sits on the 30-point grid
  ASSERT_EQ(h.radial_r.size(), 30u);
  EXPECT_NEAR(h.radial_r[9], 0.5, 1e-12);
  EXPECT_NEAR(h.radial_f[9], 0.25, 0.02);
  EXPECT_LE(h.mean_modulus, 5 / std::sqrt(20000.0));
}

TEST(Esd, CountsAccountForEveryPoint) {
  std::vector<Complex> pts{{0, 0}, {1.4, 1.4}, {1.5, -1.5}, {2, 0}, {-1.6, 0}};
  const auto h = esd_from_points(pts, 4, 1.5);
  std::uint64_t inside = 0;
  for (auto c : h.counts) inside += c;
  EXPECT_EQ(inside + h.outside, pts.size());
  EXPECT_EQ(h.outside, 2u);
  EXPECT_DOUBLE_EQ(radial_cdf(pts, 1.0), 0.2);
}

TEST(EsdExperiment, GinibreMatrix) {
  EsdConfig cfg;
  cfg.n = 200;
  cfg.seed = 11;
  const auto r = esd_experiment(cfg);
  const auto& h = r.histogram;
  std::uint64_t inside = 0;
  for (auto c : h.counts) inside += c;
  EXPECT_EQ(inside + h.outside, 200u);
  EXPECT_LE(h.mean_modulus, 5 / std::sqrt(200.0));
  EXPECT_NEAR(radial_cdf(h.eigenvalues, 0.5), 0.25, 0.1);
  EXPECT_EQ(r.records.size(), 3u);
  cfg.n = 2000;
  EXPECT_THROW(esd_experiment(cfg), Error);
}

TEST(NormControl, ZeroLawGivesZeroNorms) {
  NormControlConfig cfg;
  cfg.n = 16;
  cfg.trials = 5;
  cfg.law = EntryLaw::constant_zero();
  cfg.perm_n = 6;
  cfg.perm_trials = 20;
  cfg.a4_m = 6;
  cfg.a4_trials = 200;
  cfg.seed = 3;
  const auto r = norm_control_experiment(cfg);
  EXPECT_EQ(r.part1_success, 5u);
  for (auto e : r.excluded) EXPECT_EQ(e, 0u);
  for (double x : r.ratio) EXPECT_EQ(x, 0.0);
  for (const auto& p : r.restricted)
    for (double x : p.ratio) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(r.perm_max, 0.0);
  EXPECT_EQ(r.a4_t.size(), 3u);
}

TEST(NormControl, GaussianSmallRun) {
  NormControlConfig cfg;
  cfg.n = 32;
  cfg.trials = 20;
  cfg.epsilon = 0.25;
  cfg.perm_n = 6;
  cfg.perm_trials = 50;
  cfg.a4_m = 8;
  cfg.a4_trials = 2000;
  cfg.seed = 4;
  const auto r = norm_control_experiment(cfg);
  EXPECT_NEAR(r.excluded_limit, 2 * std::pow(32.0, 0.75), 1e-9);
  EXPECT_LE(r.perm_max, r.perm_threshold);
  ASSERT_EQ(r.restricted.size(), 2u);
  EXPECT_EQ(r.restricted[0].columns, ceil_power(32, 0.8));
  // the bound is above 1 at t <= 3 ||y||, so domination is automatic there
  for (double b : r.a4_bound) EXPECT_GT(b, 1.0);
  EXPECT_TRUE(r.a4_dominated);
  cfg.threads = 2;
  EXPECT_EQ(to_jsonl(r.records), to_jsonl(norm_control_experiment(cfg).records));
}

TEST(GammaTail, PlantedVectorsAreGamma2) {
  GammaTailConfig cfg;
  cfg.n = 16;
  cfg.samples = 8;
  cfg.step = 0.01;
  cfg.depth = 3;
  cfg.seed = 12;
  const auto r = gamma_tail_experiment(cfg);
  EXPECT_EQ(r.gamma2, 8u);
  EXPECT_EQ(r.gamma1 + r.gamma2 + r.undetermined, cfg.samples);
  EXPECT_EQ(r.decomposition_failures, 0u);
  EXPECT_EQ(r.witness_norm_failures, 0u);
}

TEST(GammaTail, PlantedWitnessBelowScale) {
  RandomStream s(5, 0);
  for (int t = 0; t < 10; ++t) {
    const auto p = planted_gamma2_vector(12, 0.2, 0.5, s);
    EXPECT_NEAR(p.a.norm(), 1.0, 1e-12);
    EXPECT_TRUE(is_gaussian_integer(p.w));
    EXPECT_LT(lcd_slack(p.a, p.scale, 0.2, 0.5), 0.0);
  }
}

TEST(GammaTail, PartitionCountsWithShortSearch) {
  GammaTailConfig cfg;
  cfg.n = 8;
  cfg.samples = 6;
  cfg.source = VectorSource::Random;
  cfg.theta_max = 1.5;
  cfg.step = 0.02;
  cfg.depth = 1;
  cfg.seed = 1;
  const auto r = gamma_tail_experiment(cfg);
  EXPECT_EQ(r.gamma1 + r.gamma2 + r.undetermined, 6u);
  EXPECT_EQ(r.outcomes.size(), 6u);
  EXPECT_NEAR(sqrt_ramp_vector(5).norm(), 1.0, 1e-12);
  cfg.n = 65;
  EXPECT_THROW(gamma_tail_experiment(cfg), Error);
}

TEST(Report, JsonLinesFormat) {
  std::vector<TrialRecord> recs{{"tail", 4, "rademacher", 7, 2, "s_n", 0.25, 1.0},
                                {"tail", 4, "rademacher", 7, 1, "s_n", std::nan(""), 2.0}};
  const auto text = to_jsonl(recs);
  std::istringstream is(text);
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(is, line)) rows.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0]["stream_id"], 1);
  EXPECT_EQ(rows[0]["value"], "nan");
  EXPECT_EQ(rows[1]["value"], 0.25);
  EXPECT_FALSE(rows[1].contains("wall_seconds"));
  EXPECT_EQ(text.substr(0, 14), "{\"experiment\":");
}

TEST(Report, CsvQuoting) {
  CsvTable t{{"a", "b"}, {}};
  t.add({"x,y", "say \"hi\""});
  EXPECT_EQ(t.str(), "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(-INFINITY), "-inf");
}
