#include "rmt/linalg.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace rmt;

namespace {

ComplexMat gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  RandomStream s(seed, 0);
  ComplexMat a(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) a(i, j) = {s.normal(), s.normal()};
  return a;
}

// max over sign vectors by plain recomputation, visiting codes in Gray order
double sign_norm_gray(const ComplexMat& b) {
  const auto m = static_cast<int>(b.cols());
  double best = 0.0;
  for (std::uint32_t k = 0; k < (1u << m); ++k) {
    const std::uint32_t g = k ^ (k >> 1);
    Eigen::VectorXcd v(m);
    for (int j = 0; j < m; ++j) v[j] = (g >> j & 1) ? -1.0 : 1.0;
    best = std::max(best, (b * v).norm());
  }
  return best;
}

}  // namespace

TEST(Ensemble, RademacherEntriesAndDeterminism) {
  RandomStream s1(1, 5), s2(1, 5);
  const auto a = sample_ensemble(2, ComplexMat::Zero(2, 2), EntryLaw::real_rademacher(), s1);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_EQ(std::abs(a.noise.data()[i]), 1.0);
  const auto b = sample_ensemble(2, ComplexMat::Zero(2, 2), EntryLaw::real_rademacher(), s2);
  EXPECT_EQ(a.noise, b.noise);
  EXPECT_EQ(a.composite, a.shift + a.noise);
}

TEST(Ensemble, StrictModeRejectsLargeShift) {
  const std::size_t n = 64;
  const double cap = std::pow(double(n), 0.51);
  RandomStream s(1, 0);
  ComplexMat big = ComplexMat::Identity(n, n) * (1.5 * cap);
  EXPECT_THROW(sample_ensemble(n, big, EntryLaw::complex_gaussian(), s, true), Error);
  ComplexMat ok = ComplexMat::Identity(n, n) * (0.5 * cap);
  EXPECT_NO_THROW(sample_ensemble(n, ok, EntryLaw::complex_gaussian(), s, true));
  EXPECT_THROW(sample_ensemble(n, ComplexMat::Zero(3, 3), EntryLaw::complex_gaussian(), s), Error);
}

TEST(Spectral, IdentityAndDiagonal) {
  auto s = spectral(ComplexMat::Identity(3, 3));
  for (double v : s.singular_values) EXPECT_NEAR(v, 1.0, 1e-14);
  ComplexMat d = ComplexMat::Zero(3, 3);
  d(0, 0) = 3;
  d(1, 1) = 1;
  d(2, 2) = 2;
  s = spectral(d);
  EXPECT_NEAR(s.singular_values.back(), 1.0, 1e-14);
  std::vector<double> ev;
  for (auto z : s.eigenvalues) ev.push_back(z.real());
  std::sort(ev.begin(), ev.end());
  EXPECT_NEAR(ev[0], 1, 1e-12);
  EXPECT_NEAR(ev[1], 2, 1e-12);
  EXPECT_NEAR(ev[2], 3, 1e-12);
}

TEST(Spectral, TwoByTwoClosedForm) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ComplexMat a = gaussian(2, 2, seed);
    // A^H A has trace ||A||_F^2 and determinant |det A|^2
    const double tr = a.squaredNorm();
    const double det = std::norm(a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0));
    const double smin = std::sqrt(2.0 * det / (tr + std::sqrt(tr * tr - 4.0 * det)));
    EXPECT_NEAR(least_singular_value(a), smin, 1e-10 * std::max(1.0, smin));
  }
}

TEST(Spectral, SummaryInvariants) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ComplexMat a = gaussian(12, 12, seed + 100);
    const auto s = spectral(a);
    for (std::size_t i = 0; i < s.singular_values.size(); ++i) {
      EXPECT_GE(s.singular_values[i], 0.0);
      if (i) {
        EXPECT_LE(s.singular_values[i], s.singular_values[i - 1]);
      }
    }
    double ss = 0;
    for (double v : s.singular_values) ss += v * v;
    EXPECT_NEAR(ss, a.squaredNorm(), 1e-8 * a.squaredNorm());
    Complex tr{0, 0};
    for (auto z : s.eigenvalues) tr += z;
    EXPECT_LE(std::abs(tr - a.trace()), 1e-6 * std::max(1.0, std::abs(a.trace())));
    EXPECT_LT(s.residual, 1e-8);
  }
}

TEST(Spectral, LeastSingularValueIsInverseNormReciprocal) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ComplexMat a = gaussian(10, 10, seed + 200) + 6.0 * ComplexMat::Identity(10, 10);
    const ComplexMat inv = a.inverse();
    const double inv_norm = Eigen::JacobiSVD<ComplexMat>(inv).singularValues()[0];
    EXPECT_NEAR(least_singular_value(a), 1.0 / inv_norm, 1e-6 / inv_norm);
  }
}

TEST(OpNorm, Examples) {
  EXPECT_NEAR(op_norm_2(ComplexMat::Identity(7, 7)), 1.0, 1e-10);
  ComplexVec u = gaussian(5, 1, 1).col(0), v = gaussian(4, 1, 2).col(0);
  u.normalize();
  v.normalize();
  EXPECT_NEAR(op_norm_2(u * v.adjoint()), 1.0, 1e-9);
  const ComplexMat a = gaussian(20, 20, 3);
  EXPECT_NEAR(op_norm_2(a, 1e-12), spectral(a).singular_values.front(), 1e-6 * op_norm_2(a));
}

TEST(SignNorm, Examples) {
  const auto id = inf_to_2_sign_norm(ComplexMat::Identity(6, 6));
  EXPECT_NEAR(id.value, std::sqrt(6.0), 1e-12);
  ComplexMat row(1, 2);
  row << 1.0, -1.0;
  const auto r = inf_to_2_sign_norm(row);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
  ASSERT_EQ(r.witness.size(), 2u);
  EXPECT_EQ(r.witness[0], 1);
  EXPECT_EQ(r.witness[1], -1);
  EXPECT_THROW(inf_to_2_sign_norm(ComplexMat::Zero(2, 21)), Error);
}

TEST(SignNorm, MatchesIndependentEnumeration) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ComplexMat b = gaussian(8, 8, seed + 300);
    const auto s = inf_to_2_sign_norm(b);
    EXPECT_NEAR(s.value, sign_norm_gray(b), 1e-10);
    Eigen::VectorXcd v(8);
    for (int j = 0; j < 8; ++j) v[j] = s.witness[j];
    EXPECT_NEAR((b * v).norm(), s.value, 1e-10);
  }
}

TEST(SignNorm, ColumnSignFlipsMoveWitness) {
  const ComplexMat b = gaussian(6, 7, 400);
  const auto s = inf_to_2_sign_norm(b);
  ComplexMat flipped = b;
  const std::vector<int> flips{1, -1, 1, 1, -1, -1, 1};
  for (int j = 0; j < 7; ++j) flipped.col(j) *= double(flips[j]);
  const auto t = inf_to_2_sign_norm(flipped);
  EXPECT_NEAR(t.value, s.value, 1e-12);
  // the flipped witness achieves the same value on the flipped matrix
  Eigen::VectorXcd v(7);
  for (int j = 0; j < 7; ++j) v[j] = double(s.witness[j] * flips[j]);
  EXPECT_NEAR((flipped * v).norm(), s.value, 1e-12);
}

TEST(InfToTwoUpper, Examples) {
  EXPECT_NEAR(inf_to_2_upper(ComplexMat::Identity(5, 5)), std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(inf_to_2_upper(ComplexMat::Ones(4, 4)), std::pow(4.0, 1.5), 1e-12);
  RandomStream s(5, 0);
  for (int t = 0; t < 10; ++t) {
    ComplexMat b(8, 8);
    for (Eigen::Index i = 0; i < 64; ++i) b.data()[i] = s.below(2) ? 1.0 : -1.0;
    EXPECT_GE(inf_to_2_upper(b), inf_to_2_sign_norm(b).value - 1e-12);
  }
}

TEST(SelectRows, Examples) {
  const auto all = select_good_rows(ComplexMat::Zero(10, 6), 0.25);
  EXPECT_EQ(all.indices.size(), 10u);

  const double n = 10, m = 6, eps = 0.25;
  ComplexMat a = ComplexMat::Zero(10, 6);
  a.row(3).setConstant(10 * std::pow(n, eps) * std::sqrt(m) / m);
  const auto sel = select_good_rows(a, eps);
  EXPECT_EQ(sel.excluded(), 1u);
  EXPECT_EQ(std::count(sel.indices.begin(), sel.indices.end(), 3u), 0);
  EXPECT_TRUE(std::is_sorted(sel.indices.begin(), sel.indices.end()));
  EXPECT_THROW(select_good_rows(a, 0.5), Error);
}

TEST(SelectRows, GaussianExclusionRate) {
  const std::size_t n = 100;
  const double limit = 2 * std::pow(double(n), 0.75);
  int ok = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    RandomStream s(77, t);
    const auto e = sample_ensemble(n, ComplexMat::Zero(n, n), EntryLaw::complex_gaussian(), s);
    const auto sel = select_good_rows(e.noise, 0.25);
    ok += double(sel.excluded()) <= limit;
    for (std::size_t i : sel.indices) {
      EXPECT_LE(e.noise.row(i).squaredNorm(), sel.l2_threshold);
      EXPECT_LE(std::abs(e.noise.row(i).sum()), sel.sum_threshold);
    }
  }
  EXPECT_GE(ok, 198);
}

TEST(Projection, IdentityEmptyIdempotent) {
  const ComplexMat a = gaussian(5, 4, 9);
  const auto full = selection_from_indices({0, 1, 2, 3, 4}, 5);
  EXPECT_EQ(project_rows(a, full), a);
  const auto none = selection_from_indices({}, 5);
  EXPECT_EQ(project_rows(a, none), ComplexMat::Zero(5, 4));
  const auto some = selection_from_indices({3, 1, 3}, 5);
  EXPECT_EQ(some.indices, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(project_rows(project_rows(a, some), some), project_rows(a, some));
  EXPECT_EQ(project_cols(project_cols(a, some), some), project_cols(a, some));
  EXPECT_EQ(restrict_cols(a, some).cols(), 2);
  EXPECT_THROW(project_rows(a, selection_from_indices({7}, 8)), Error);
}

TEST(Permutation, RowsAreRearrangements) {
  const ComplexMat b = gaussian(6, 9, 10);
  RandomStream s(1, 1);
  const ComplexMat p = permute_rows_independently(b, s);
  for (Eigen::Index i = 0; i < 6; ++i) {
    std::vector<double> x, y;
    for (Eigen::Index j = 0; j < 9; ++j) {
      x.push_back(b(i, j).real());
      y.push_back(p(i, j).real());
    }
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    EXPECT_EQ(x, y);
    EXPECT_NEAR(std::abs(b.row(i).sum() - p.row(i).sum()), 0.0, 1e-12);
  }
}

TEST(Permutation, UniformOnThreeElements) {
  ComplexMat b(1, 3);
  b << 0.0, 1.0, 2.0;
  std::map<std::vector<int>, int> freq;
  const int trials = 60000;
  RandomStream s(3, 3);
  for (int t = 0; t < trials; ++t) {
    const ComplexMat p = permute_rows_independently(b, s);
    freq[{int(p(0, 0).real()), int(p(0, 1).real()), int(p(0, 2).real())}]++;
  }
  EXPECT_EQ(freq.size(), 6u);
  for (auto& [k, c] : freq) EXPECT_NEAR(c / double(trials), 1.0 / 6.0, 0.01);
}

TEST(Permutation, StatisticMeanMatchesAverage) {
  const std::vector<int> v{1, 1, -1, 1, -1};
  const ComplexVec y = gaussian(5, 1, 11).col(0);
  // average over all 120 permutations
  std::vector<std::size_t> perm{0, 1, 2, 3, 4};
  Complex sum{0, 0};
  int count = 0;
  do {
    sum += permutation_statistic(v, y, perm);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_NEAR(std::abs(sum / double(count) - permutation_statistic_mean(v, y)), 0.0, 1e-12);
}
