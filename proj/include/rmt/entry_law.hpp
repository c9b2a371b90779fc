#pragma once

#include "rmt/ball_cover.hpp"
#include "rmt/core.hpp"
#include "rmt/random.hpp"
#include "rmt/rational.hpp"
#include "rmt/stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rmt {

struct Atom {
  Complex value;
  Rational prob;
};

/// Distribution of a single matrix entry z (mean 0, variance 1).
///
/// Every kind except complex-gaussian is stored as a finite list of atoms with
/// exact rational probabilities; all discrete kinds share one sampler, so a
/// discrete law written out by hand reproduces a built-in law draw for draw.
class EntryLaw {
 public:
  enum class Kind { ComplexGaussian, RealRademacher, ComplexRademacher, Discrete, LazyBernoulli };

  static EntryLaw complex_gaussian() { return EntryLaw(Kind::ComplexGaussian, {}, "complex-gaussian"); }

  static EntryLaw real_rademacher() {
    return EntryLaw(Kind::RealRademacher, {{{1.0, 0.0}, Rational(1, 2)}, {{-1.0, 0.0}, Rational(1, 2)}},
                    "real-rademacher");
  }

  static EntryLaw complex_rademacher() {
    const double c = 1.0 / std::sqrt(2.0);
    return EntryLaw(Kind::ComplexRademacher,
                    {{{c, c}, Rational(1, 4)},
                     {{c, -c}, Rational(1, 4)},
                     {{-c, c}, Rational(1, 4)},
                     {{-c, -c}, Rational(1, 4)}},
                    "complex-rademacher");
  }

  /// +-q^{-1/2} with probability q/2 each, 0 with probability 1 - q.
  static EntryLaw lazy_bernoulli(const Rational& q) {
    if (!(Rational(0) < q) || !(q <= Rational(1)))
      throw Error(ErrorKind::InvalidLaw, "lazy-bernoulli needs q in (0, 1]");
    const double amp = 1.0 / std::sqrt(q.to_double());
    const Rational half_q = q / Rational(2);
    std::vector<Atom> atoms{{{amp, 0.0}, half_q}, {{-amp, 0.0}, half_q}};
    if (q < Rational(1)) atoms.push_back({{0.0, 0.0}, Rational(1) - q});
    std::string name = "lazy-bernoulli:" + format_double(q.to_double());
    return EntryLaw(Kind::LazyBernoulli, std::move(atoms), std::move(name));
  }

  static EntryLaw discrete(std::vector<Atom> atoms) {
    std::string name = "discrete:" + format_atoms(atoms);
    return EntryLaw(Kind::Discrete, std::move(atoms), std::move(name));
  }

  /// Skips the mean/variance checks. Test and degenerate-case use only.
  static EntryLaw unchecked_discrete(std::vector<Atom> atoms, std::string name = "unchecked") {
    EntryLaw law;
    law.kind_ = Kind::Discrete;
    law.atoms_ = std::move(atoms);
    law.name_ = std::move(name);
    law.build_cdf();
    return law;
  }

  /// Point mass at zero; violates variance 1 on purpose.
  static EntryLaw constant_zero() { return unchecked_discrete({{{0.0, 0.0}, Rational(1)}}, "constant-0"); }

  /// "complex-gaussian", "real-rademacher" (or "rademacher"),
  /// "complex-rademacher", "lazy-bernoulli:<q>", "discrete:[(v,p),...]" where
  /// v is a complex literal such as 1, -0.5, 2i, 1-1i and p a decimal or a/b.
  static EntryLaw parse(std::string_view spec) {
    const std::string s = strip(spec);
    if (s == "complex-gaussian") return complex_gaussian();
    if (s == "real-rademacher" || s == "rademacher") return real_rademacher();
    if (s == "complex-rademacher") return complex_rademacher();
    if (s == "constant-0" || s == "zero") return constant_zero();
    if (s.rfind("lazy-bernoulli:", 0) == 0) return lazy_bernoulli(Rational::parse(strip(s.substr(15))));
    if (s.rfind("discrete:", 0) == 0) return discrete(parse_atoms(s.substr(9)));
    throw Error(ErrorKind::InvalidLaw, "unknown law '" + s + "'");
  }

  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  bool is_discrete() const noexcept { return kind_ != Kind::ComplexGaussian; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }

  double max_modulus() const {
    if (!is_discrete()) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (const auto& a : atoms_) m = std::max(m, std::abs(a.value));
    return m;
  }

  Complex sample(RandomStream& stream) const {
    if (kind_ == Kind::ComplexGaussian) {
      const double re = stream.normal();
      const double im = stream.normal();
      return Complex(re, im) * kInvSqrt2;
    }
    const double u = stream.uniform();
    for (std::size_t i = 0; i + 1 < cdf_.size(); ++i)
      if (u < cdf_[i]) return atoms_[i].value;
    return atoms_.back().value;
  }

  ComplexVec sample(RandomStream& stream, std::size_t count) const {
    ComplexVec out(static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) out[static_cast<Eigen::Index>(i)] = sample(stream);
    return out;
  }

  /// Exact mean and E|z|^2 for discrete kinds.
  std::pair<Complex, double> exact_moments() const {
    Complex mean{0.0, 0.0};
    double second = 0.0;
    for (const auto& a : atoms_) {
      mean += a.prob.to_double() * a.value;
      second += a.prob.to_double() * std::norm(a.value);
    }
    return {mean, second};
  }

  friend bool operator==(const EntryLaw& a, const EntryLaw& b) { return a.name_ == b.name_; }

 private:
  static constexpr double kInvSqrt2 = 0.70710678118654752440;

  EntryLaw() = default;

  EntryLaw(Kind kind, std::vector<Atom> atoms, std::string name)
      : kind_(kind), atoms_(std::move(atoms)), name_(std::move(name)) {
    validate();
    build_cdf();
  }

  void validate() const {
    if (kind_ == Kind::ComplexGaussian) return;
    if (atoms_.empty()) throw Error(ErrorKind::InvalidLaw, "discrete law without atoms");
    Rational total(0);
    for (const auto& a : atoms_) {
      if (!(Rational(0) < a.prob)) throw Error(ErrorKind::InvalidLaw, "non-positive atom probability");
      if (!std::isfinite(a.value.real()) || !std::isfinite(a.value.imag()))
        throw Error(ErrorKind::InvalidLaw, "non-finite atom");
      total += a.prob;
    }
    if (!(total == Rational(1)))
      throw Error(ErrorKind::InvalidLaw, "probabilities sum to " + total.str() + ", not 1");
    const auto [mean, second] = exact_moments();
    if (std::abs(mean) > 1e-12) throw Error(ErrorKind::InvalidLaw, "mean is not 0");
    if (std::abs(second - 1.0) > 1e-12) throw Error(ErrorKind::InvalidLaw, "variance is not 1");
  }

  void build_cdf() {
    cdf_.clear();
    double acc = 0.0;
    for (const auto& a : atoms_) {
      acc += a.prob.to_double();
      cdf_.push_back(acc);
    }
  }

  static std::string strip(std::string_view s) {
    std::string out;
    for (char c : s)
      if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    return out;
  }

  static std::string format_double(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
  }

  static std::string format_atoms(const std::vector<Atom>& atoms) {
    std::string s = "[";
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (i) s += ",";
      s += "(" + format_double(atoms[i].value.real());
      if (atoms[i].value.imag() != 0.0)
        s += (atoms[i].value.imag() < 0 ? "" : "+") + format_double(atoms[i].value.imag()) + "i";
      s += "," + atoms[i].prob.str() + ")";
    }
    return s + "]";
  }

  static double parse_real(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw Error(ErrorKind::InvalidLaw, "bad number '" + s + "'");
    return v;
  }

 public:
  /// Complex literal: a, bi, a+bi, a-bi, i, -i.
  static Complex parse_complex(const std::string& text) {
    const std::string s = strip(text);
    if (s.empty()) throw Error(ErrorKind::InvalidLaw, "empty complex literal");
    if (s.back() != 'i' && s.back() != 'j') return {parse_real(s), 0.0};
    const std::string body = s.substr(0, s.size() - 1);
    std::size_t split = std::string::npos;
    for (std::size_t k = body.size(); k-- > 1;) {
      if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
        split = k;
        break;
      }
    }
    auto imag_of = [](const std::string& t) {
      if (t.empty() || t == "+") return 1.0;
      if (t == "-") return -1.0;
      return parse_real(t);
    };
    if (split == std::string::npos) return {0.0, imag_of(body)};
    return {parse_real(body.substr(0, split)), imag_of(body.substr(split))};
  }

 private:
  static std::vector<Atom> parse_atoms(const std::string& text) {
    if (text.size() < 2 || text.front() != '[' || text.back() != ']')
      throw Error(ErrorKind::InvalidLaw, "discrete law must look like [(v,p),...]");
    std::vector<Atom> atoms;
    std::size_t pos = 1;
    while (pos < text.size() - 1) {
      if (text[pos] == ',') {
        ++pos;
        continue;
      }
      if (text[pos] != '(') throw Error(ErrorKind::InvalidLaw, "expected '(' in discrete law");
      const std::size_t close = text.find(')', pos);
      if (close == std::string::npos) throw Error(ErrorKind::InvalidLaw, "unbalanced '(' in discrete law");
      const std::string inner = text.substr(pos + 1, close - pos - 1);
      const std::size_t comma = inner.rfind(',');
      if (comma == std::string::npos) throw Error(ErrorKind::InvalidLaw, "atom needs (value,prob)");
      try {
        atoms.push_back({parse_complex(inner.substr(0, comma)), Rational::parse(inner.substr(comma + 1))});
      } catch (const std::invalid_argument& e) {
        throw Error(ErrorKind::InvalidLaw, e.what());
      }
      pos = close + 1;
    }
    return atoms;
  }

  Kind kind_ = Kind::Discrete;
  std::vector<Atom> atoms_;
  std::vector<double> cdf_;
  std::string name_;
};

inline ComplexVec sample(const EntryLaw& law, RandomStream& stream, std::size_t count) {
  return law.sample(stream, count);
}

/// Law of x = (z1 - z2) * Ber(1/2). For discrete bases the support is exact,
/// with rational probabilities; otherwise only the sampler is available.
class SymmetrizedLaw {
 public:
  explicit SymmetrizedLaw(EntryLaw base) : base_(std::move(base)) {
    if (!base_.is_discrete()) return;
    std::map<std::pair<std::int64_t, std::int64_t>, Atom> diff_bins, sym_bins;
    auto add = [](auto& bins, const Complex& v, const Rational& p) {
      const std::pair<std::int64_t, std::int64_t> key{std::llround(v.real() * 1e9),
                                                      std::llround(v.imag() * 1e9)};
      auto [it, inserted] = bins.try_emplace(key, Atom{v, p});
      if (!inserted) it->second.prob += p;
    };
    const Rational half(1, 2);
    add(sym_bins, Complex(0.0, 0.0), half);
    for (const auto& a : base_.atoms())
      for (const auto& b : base_.atoms()) {
        const Complex d = a.value - b.value;
        const Rational p = a.prob * b.prob;
        add(diff_bins, d, p);
        add(sym_bins, d, p * half);
      }
    for (auto& [k, atom] : diff_bins) difference_.push_back(atom);
    for (auto& [k, atom] : sym_bins) support_.push_back(atom);
  }

  const EntryLaw& base() const noexcept { return base_; }
  bool is_exact() const noexcept { return base_.is_discrete(); }

  /// Support of (z1 - z2) * Ber(1/2).
  const std::vector<Atom>& support() const noexcept { return support_; }
  /// Support of z1 - z2 (no Bernoulli thinning).
  const std::vector<Atom>& difference_support() const noexcept { return difference_; }

  Complex sample_difference(RandomStream& stream) const {
    const Complex z1 = base_.sample(stream);
    const Complex z2 = base_.sample(stream);
    return z1 - z2;
  }

  Complex sample(RandomStream& stream) const {
    const Complex d = sample_difference(stream);
    return (stream.next_u64() >> 63) ? d : Complex(0.0, 0.0);
  }

  Rational mass_at(const Complex& x) const {
    Rational m(0);
    for (const auto& a : support_)
      if (std::abs(a.value - x) < 1e-9) m += a.prob;
    return m;
  }

 private:
  EntryLaw base_;
  std::vector<Atom> support_;
  std::vector<Atom> difference_;
};

inline SymmetrizedLaw symmetrize(const EntryLaw& law) { return SymmetrizedLaw(law); }

struct GoodnessEstimate {
  double c_z = 1.0;
  double u_z = 0.0;   // measured rho_{v_z, z}(1)
  double v_z = 0.5;   // radius at which u_z is measured
  double confidence = 0.99;
  double pass_probability = 0.0;  // Pr(1/C <= |z1 - z2| <= C) at the chosen C
  bool exact = false;
};

/// Default candidate grid 1.0, 1.1, ..., 10.0 (built from k/10 to stay exact).
inline std::vector<double> default_goodness_grid() {
  std::vector<double> grid;
  for (int k = 10; k <= 100; ++k) grid.push_back(k / 10.0);
  return grid;
}

/// Smallest grid C with Pr(1/C <= |z1 - z2| <= C) >= 1/C. Discrete laws are
/// evaluated exactly; otherwise `trials` pairs are drawn and a candidate
/// passes when the one-sided 99% Wilson lower bound clears 1/C.
inline GoodnessEstimate estimate_goodness(const EntryLaw& law, std::size_t trials,
                                          const std::vector<double>& grid, std::uint64_t seed = 0,
                                          unsigned threads = 0) {
  if (grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty goodness grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 1.0) throw Error(ErrorKind::InvalidArgument, "goodness grid values must be >= 1");
    if (i && grid[i] <= grid[i - 1]) throw Error(ErrorKind::InvalidArgument, "goodness grid must ascend");
  }
  GoodnessEstimate est;
  est.exact = law.is_discrete();
  const double slack = 1e-12;

  if (est.exact) {
    const SymmetrizedLaw sym(law);
    std::optional<double> chosen;
    for (double c : grid) {
      double mass = 0.0;
      for (const auto& a : sym.difference_support()) {
        const double m = std::abs(a.value);
        if (m >= 1.0 / c - slack && m <= c + slack) mass += a.prob.to_double();
      }
      if (mass >= 1.0 / c - slack) {
        chosen = c;
        est.pass_probability = mass;
        break;
      }
    }
    if (!chosen) throw Error(ErrorKind::NoFiniteC, "no grid value certifies goodness for " + law.name());
    est.c_z = *chosen;
    std::vector<WeightedPoint> pts;
    for (const auto& a : law.atoms()) pts.push_back({a.value, a.prob.to_double()});
    est.u_z = max_ball_mass(detail::merge_points(pts, 1e-12), est.v_z).mass;
    return est;
  }

  if (trials < 10000) throw Error(ErrorKind::InvalidArgument, "goodness estimation needs >= 1e4 trials");
  constexpr std::size_t kBlock = 1 << 14;
  const std::size_t blocks = (trials + kBlock - 1) / kBlock;
  std::vector<double> moduli(trials);
  parallel_for(
      blocks,
      [&](std::size_t b) {
        RandomStream stream(seed, b);
        const std::size_t end = std::min(trials, (b + 1) * kBlock);
        for (std::size_t t = b * kBlock; t < end; ++t) {
          const Complex z1 = law.sample(stream);
          const Complex z2 = law.sample(stream);
          moduli[t] = std::abs(z1 - z2);
        }
      },
      threads);
  std::sort(moduli.begin(), moduli.end());
  std::optional<double> chosen;
  for (double c : grid) {
    const auto lo = std::lower_bound(moduli.begin(), moduli.end(), 1.0 / c);
    const auto hi = std::upper_bound(moduli.begin(), moduli.end(), c);
    const auto hits = static_cast<std::uint64_t>(hi - lo);
    const Interval ci = wilson_interval(hits, trials, kZ99OneSided);
    if (ci.lo >= 1.0 / c) {
      chosen = c;
      est.pass_probability = static_cast<double>(hits) / static_cast<double>(trials);
      break;
    }
  }
  if (!chosen) throw Error(ErrorKind::NoFiniteC, "no grid value certifies goodness for " + law.name());
  est.c_z = *chosen;

  // u_z from a 10^4-point sample: the best radius-v_z disc centered on a sample.
  RandomStream stream(seed, blocks + 1);
  constexpr std::size_t kU = 10000;
  std::vector<WeightedPoint> pts(kU);
  for (auto& p : pts) p = {law.sample(stream), 1.0 / kU};
  est.u_z = max_ball_mass(pts, est.v_z, false).mass;
  return est;
}

}  // namespace rmt
