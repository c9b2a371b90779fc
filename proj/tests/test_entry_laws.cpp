#include "rmt/entry_law.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace rmt;

namespace {

// Independent convolution: (z1 - z2) * Ber(1/2) over exact rationals, keyed on
// values rounded to 1e-9.
std::map<std::pair<long long, long long>, Rational> convolve(const std::vector<Atom>& atoms) {
  std::map<std::pair<long long, long long>, Rational> out;
  auto key = [](Complex z) { return std::pair{std::llround(z.real() * 1e9), std::llround(z.imag() * 1e9)}; };
  out[key({0, 0})] += Rational(1, 2);
  for (const auto& a : atoms)
    for (const auto& b : atoms) out[key(a.value - b.value)] += a.prob * b.prob * Rational(1, 2);
  return out;
}

Rational total(const std::vector<Atom>& atoms) {
  Rational s(0);
  for (const auto& a : atoms) s += a.prob;
  return s;
}

}  // namespace

TEST(EntryLaw, RademacherSupport) {
  RandomStream s(1, 0);
  const auto v = EntryLaw::real_rademacher().sample(s, 10000);
  for (Eigen::Index i = 0; i < v.size(); ++i) EXPECT_TRUE(v[i] == Complex(1, 0) || v[i] == Complex(-1, 0));
}

TEST(EntryLaw, GaussianSecondMoment) {
  RandomStream s(2, 0);
  const auto v = EntryLaw::complex_gaussian().sample(s, 1000000);
  const double m2 = v.squaredNorm() / double(v.size());
  EXPECT_GE(m2, 0.98);
  EXPECT_LE(m2, 1.02);
  EXPECT_LT(std::abs(v.mean()), 3.0 / std::sqrt(double(v.size())));
}

TEST(EntryLaw, ExplicitDiscreteMatchesRademacherBitForBit) {
  const auto d = EntryLaw::parse("discrete:[(1,0.5),(-1,0.5)]");
  RandomStream a(3, 4), b(3, 4);
  const auto x = d.sample(a, 5000);
  const auto y = EntryLaw::real_rademacher().sample(b, 5000);
  EXPECT_EQ(x, y);
}

TEST(EntryLaw, ParsesSpecs) {
  EXPECT_FALSE(EntryLaw::parse("complex-gaussian").is_discrete());
  EXPECT_TRUE(EntryLaw::parse("rademacher").is_discrete());
  EXPECT_EQ(EntryLaw::parse("complex-rademacher").atoms().size(), 4u);
  const auto lb = EntryLaw::parse("lazy-bernoulli:0.01");
  const auto [mean, m2] = lb.exact_moments();
  EXPECT_NEAR(std::abs(mean), 0.0, 1e-15);
  EXPECT_NEAR(m2, 1.0, 1e-12);
  EXPECT_NEAR(lb.max_modulus(), 10.0, 1e-12);
  EXPECT_THROW(EntryLaw::parse("cauchy"), Error);
}

TEST(EntryLaw, RejectsNonStandardMoments) {
  EXPECT_THROW(EntryLaw::parse("discrete:[(1,0.5),(0,0.5)]"), Error);   // mean 1/2
  EXPECT_THROW(EntryLaw::parse("discrete:[(2,0.5),(-2,0.5)]"), Error);  // variance 4
  EXPECT_THROW(EntryLaw::parse("discrete:[(1,0.5),(-1,0.4)]"), Error);  // mass 0.9
}

TEST(EntryLaw, MomentsConvergeForAllBuiltins) {
  for (const char* spec : {"complex-gaussian", "rademacher", "complex-rademacher", "lazy-bernoulli:1/4"}) {
    const auto law = EntryLaw::parse(spec);
    RandomStream s(11, 0);
    const std::size_t n = 200000;
    const auto v = law.sample(s, n);
    const double tol = 3.0 / std::sqrt(double(n)) * (law.is_discrete() ? law.max_modulus() * law.max_modulus() : 3.0);
    EXPECT_LT(std::abs(v.mean()), tol) << spec;
    EXPECT_NEAR(v.squaredNorm() / double(n), 1.0, tol) << spec;
  }
}

TEST(Symmetrize, RademacherSupportMatchesConvolution) {
  const auto sym = symmetrize(EntryLaw::real_rademacher());
  EXPECT_EQ(sym.mass_at({0, 0}), Rational(3, 4));
  EXPECT_EQ(sym.mass_at({2, 0}), Rational(1, 8));
  EXPECT_EQ(sym.mass_at({-2, 0}), Rational(1, 8));
  EXPECT_EQ(sym.support().size(), 3u);
}

TEST(Symmetrize, ConstantZeroIsPointMass) {
  const auto sym = symmetrize(EntryLaw::constant_zero());
  ASSERT_EQ(sym.support().size(), 1u);
  EXPECT_EQ(sym.support()[0].prob, Rational(1));
}

TEST(Symmetrize, ComplexRademacherSupport) {
  const auto sym = symmetrize(EntryLaw::complex_rademacher());
  const auto oracle = convolve(EntryLaw::complex_rademacher().atoms());
  EXPECT_EQ(sym.support().size(), oracle.size());
  // differences (+-1+-i)/sqrt2 - (+-1+-i)/sqrt2 take 9 values
  EXPECT_EQ(sym.support().size(), 9u);
  EXPECT_GE(sym.mass_at({0, 0}).to_double(), 0.5);
  EXPECT_EQ(sym.mass_at({0, 0}), Rational(5, 8));
}

TEST(Symmetrize, DiscreteLawsSumToOneAndAreSymmetric) {
  for (const char* spec :
       {"rademacher", "complex-rademacher", "lazy-bernoulli:1/3", "discrete:[(1,1/4),(-1,1/4),(i,1/4),(-i,1/4)]"}) {
    const auto law = EntryLaw::parse(spec);
    const auto sym = symmetrize(law);
    EXPECT_EQ(total(sym.support()), Rational(1)) << spec;
    EXPECT_EQ(total(sym.difference_support()), Rational(1)) << spec;
    for (const auto& a : sym.support()) EXPECT_EQ(sym.mass_at(a.value), sym.mass_at(-a.value)) << spec;
    const auto oracle = convolve(law.atoms());
    ASSERT_EQ(oracle.size(), sym.support().size()) << spec;
    for (const auto& a : sym.support())
      EXPECT_EQ(a.prob, oracle.at({std::llround(a.value.real() * 1e9), std::llround(a.value.imag() * 1e9)}));
  }
}

TEST(Goodness, RademacherExactIsTwo) {
  const auto g = estimate_goodness(EntryLaw::real_rademacher(), 10000, default_goodness_grid());
  EXPECT_TRUE(g.exact);
  EXPECT_DOUBLE_EQ(g.c_z, 2.0);
  EXPECT_DOUBLE_EQ(g.pass_probability, 0.5);
}

TEST(Goodness, ConstantZeroHasNoFiniteC) {
  try {
    estimate_goodness(EntryLaw::constant_zero(), 10000, default_goodness_grid());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoFiniteC);
  }
}

TEST(Goodness, GaussianPassesBelowThree) {
  std::vector<double> grid;
  for (int k = 11; k <= 50; ++k) grid.push_back(k / 10.0);
  const auto g = estimate_goodness(EntryLaw::complex_gaussian(), 1000000, grid, 7);
  EXPECT_FALSE(g.exact);
  EXPECT_LE(g.c_z, 3.0);
  EXPECT_GT(g.u_z, 0.0);
  EXPECT_LT(g.u_z, 1.0);
}

TEST(Goodness, MonotoneOnGrid) {
  // If C passes, a coarser grid starting above C picks its first entry.
  const auto law = EntryLaw::parse("lazy-bernoulli:1/4");
  const auto g = estimate_goodness(law, 10000, default_goodness_grid());
  std::vector<double> above;
  for (double c : default_goodness_grid())
    if (c > g.c_z) above.push_back(c);
  if (!above.empty()) {
    const auto h = estimate_goodness(law, 10000, above);
    EXPECT_DOUBLE_EQ(h.c_z, above.front());
  }
}

TEST(Goodness, RejectsBadGrids) {
  EXPECT_THROW(estimate_goodness(EntryLaw::real_rademacher(), 10000, {0.5}), Error);
  EXPECT_THROW(estimate_goodness(EntryLaw::real_rademacher(), 10000, {2, 1.5}), Error);
  EXPECT_THROW(estimate_goodness(EntryLaw::complex_gaussian(), 100, {2}), Error);
}
