#include "rmt/core.hpp"
#include "rmt/random.hpp"
#include "rmt/rational.hpp"
#include "rmt/stats.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <numbers>

using namespace rmt;

namespace {

ComplexVec vec(std::initializer_list<Complex> xs) {
  ComplexVec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (const auto& x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST(RandomStream, SameParametersGiveSameDraws) {
  RandomStream a = seeded_stream(42, 0), b = seeded_stream(42, 0);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomStream, DistinctStreamsDiffer) {
  RandomStream a(42, 0), b(42, 1);
  int equal = 0;
  for (int i = 0; i < 1000; ++i) equal += a.next_u64() == b.next_u64();
  EXPECT_EQ(equal, 0);
}

TEST(RandomStream, TrialOutputIndependentOfThreadCount) {
  auto run = [](unsigned threads) {
    std::vector<double> out(64);
    parallel_for(
        out.size(),
        [&](std::size_t t) {
          RandomStream s(42, t);
          double acc = 0;
          for (int i = 0; i < 100; ++i) acc += s.normal();
          out[t] = acc;
        },
        threads);
    return out;
  };
  const auto one = run(1), eight = run(8);
  EXPECT_EQ(one[7], eight[7]);
  EXPECT_EQ(one, eight);
}

TEST(RandomStream, UniformRangeAndMoments) {
  RandomStream s(1, 2);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  RandomStream g(1, 3);
  sum = 0;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.015);
}

TEST(RandomStream, BelowIsUniform) {
  RandomStream s(9, 9);
  std::vector<int> hits(5);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++hits[s.below(5)];
  for (int h : hits) EXPECT_NEAR(h / double(n), 0.2, 0.01);
}

TEST(RandomStream, ResolveThreadsPrefersExplicitRequest) {
  EXPECT_EQ(resolve_threads(3), 3u);
  ::setenv("RMT_THREADS", "5", 1);
  EXPECT_EQ(resolve_threads(0), 5u);
  ::unsetenv("RMT_THREADS");
  EXPECT_GE(resolve_threads(0), 1u);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(
                   10, [](std::size_t i) { if (i == 3) throw std::runtime_error("x"); }, 4),
               std::runtime_error);
}

TEST(Norm, Examples) {
  EXPECT_DOUBLE_EQ(norm(vec({{3, 4}, {0, 0}}), NormKind::L2), 5.0);
  EXPECT_DOUBLE_EQ(norm(vec({{1, 0}, {0, 1}, {-1, 0}}), NormKind::Linf), 1.0);
  EXPECT_NEAR(norm(vec({{1, 1}, {1, -1}}), NormKind::L1), 2.0 * std::numbers::sqrt2, 1e-15);
}

TEST(Norm, OrderingAndTriangleInequality) {
  RandomStream s(5, 0);
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<Eigen::Index>(1 + s.below(12));
    ComplexVec x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x[i] = {s.normal(), s.normal()};
      y[i] = {s.normal(), s.normal()};
    }
    EXPECT_LE(norm(x, NormKind::Linf), norm(x, NormKind::L2));
    EXPECT_LE(norm(x, NormKind::L2), norm(x, NormKind::L1) * (1 + 1e-15));
    for (auto k : {NormKind::L1, NormKind::L2, NormKind::Linf}) {
      const double lhs = norm(x + y, k), rhs = norm(x, k) + norm(y, k);
      EXPECT_LE(lhs, rhs + 8 * std::numeric_limits<double>::epsilon() * rhs);
    }
  }
}

TEST(Lattice, Examples) {
  auto r = nearest_gaussian_lattice(vec({{0.4, 0.6}}));
  EXPECT_EQ(r.point[0], Complex(0, 1));
  EXPECT_NEAR(r.distance, std::sqrt(0.32), 1e-15);

  r = nearest_gaussian_lattice(vec({{2, -3}, {0, 0}}));
  EXPECT_EQ(r.point[0], Complex(2, -3));
  EXPECT_EQ(r.point[1], Complex(0, 0));
  EXPECT_EQ(r.distance, 0.0);

  r = nearest_gaussian_lattice(vec({{0.5, 0.5}}));
  EXPECT_EQ(r.point[0], Complex(1, 1));
  EXPECT_NEAR(r.distance, std::sqrt(0.5), 1e-15);
  r = nearest_gaussian_lattice(vec({{-0.5, -2.5}}));
  EXPECT_EQ(r.point[0], Complex(-1, -3));
}

TEST(Lattice, DistanceAtMostHalfCellPerCoordinate) {
  RandomStream s(6, 0);
  for (int t = 0; t < 500; ++t) {
    const auto n = static_cast<Eigen::Index>(1 + s.below(10));
    ComplexVec x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = {20 * s.normal(), 20 * s.normal()};
    const auto r = nearest_gaussian_lattice(x);
    EXPECT_LE(r.distance, std::sqrt(n / 2.0) + 1e-12);
    EXPECT_TRUE(is_gaussian_integer(r.point));
    EXPECT_NEAR(lattice_distance(x, 1.0), r.distance, 1e-12);
    // no neighbouring lattice point is closer
    for (Eigen::Index i = 0; i < n; ++i)
      for (Complex d : {Complex(1, 0), Complex(-1, 0), Complex(0, 1), Complex(0, -1)})
        EXPECT_LE(std::abs(x[i] - r.point[i]), std::abs(x[i] - r.point[i] - d) + 1e-12);
  }
}

TEST(Rational, ParseAndArithmetic) {
  EXPECT_EQ(Rational::parse("0.125"), Rational(1, 8));
  EXPECT_EQ(Rational::parse("1/8"), Rational(1, 8));
  EXPECT_EQ(Rational::parse("1e-2"), Rational(1, 100));
  EXPECT_EQ(Rational(1, 3) + Rational(1, 6), Rational(1, 2));
  EXPECT_EQ(Rational(2, 4) * Rational(2, 1), Rational(1));
  EXPECT_TRUE(Rational(1, 3) < Rational(1, 2));
}

TEST(Stats, WilsonIntervalContainsEstimate) {
  for (std::uint64_t n : {1u, 10u, 1000u})
    for (std::uint64_t k = 0; k <= n; k += std::max<std::uint64_t>(1, n / 7)) {
      const auto ci = wilson_interval(k, n);
      const double p = double(k) / double(n);
      EXPECT_LE(ci.lo, p);
      EXPECT_GE(ci.hi, p);
      EXPECT_GE(ci.lo, 0.0);
      EXPECT_LE(ci.hi, 1.0);
    }
  // k = 0 gives a nondegenerate upper end
  EXPECT_GT(wilson_interval(0, 100).hi, 0.0);
}

TEST(Stats, NormalQuantileMatchesConstants) {
  EXPECT_NEAR(normal_quantile(0.995), kZ99TwoSided, 1e-9);
  EXPECT_NEAR(normal_quantile(0.99), kZ99OneSided, 1e-9);
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-12);
}

TEST(Stats, LeastSquaresRecoversLine) {
  std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const auto fit = least_squares(x, y);
  ASSERT_TRUE(fit);
  EXPECT_NEAR(fit->slope, 2.0, 1e-12);
  EXPECT_NEAR(fit->intercept, 1.0, 1e-12);
  std::vector<double> one{1};
  EXPECT_FALSE(least_squares(one, one));
}

TEST(Stats, PairwiseSumAndQuantile) {
  std::vector<double> v(1000, 0.1);
  EXPECT_NEAR(pairwise_sum(v), 100.0, 1e-12);
  EXPECT_EQ(quantile({3, 1, 2}, 0.5), 2.0);
  EXPECT_EQ(quantile({3, 1, 2}, 1.0), 3.0);
}
