#pragma once

#include "rmt/anticoncentration.hpp"
#include "rmt/core.hpp"
#include "rmt/entry_law.hpp"
#include "rmt/lcd.hpp"
#include "rmt/linalg.hpp"
#include "rmt/random.hpp"
#include "rmt/report.hpp"
#include "rmt/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace rmt {

// ---------------------------------------------------------------------------
// Shift matrices

struct ShiftSpec {
  enum class Kind { Zero, Diagonal, File };
  Kind kind = Kind::Diagonal;
  double scale = 0.5;  // diagonal entries scale * n^0.51
  std::string path;

  /// "zero", "diag", "diag:<c>" or "file:<path>".
  static ShiftSpec parse(std::string_view text) {
    const std::string s(text);
    if (s == "zero") return {Kind::Zero, 0.0, {}};
    if (s == "diag") return {Kind::Diagonal, 0.5, {}};
    if (s.rfind("diag:", 0) == 0) {
      std::size_t used = 0;
      const std::string num = s.substr(5);
      double c = 0.0;
      try {
        c = std::stod(num, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != num.size() || !std::isfinite(c))
        throw Error(ErrorKind::InvalidArgument, "bad diagonal shift scale '" + num + "'");
      return {Kind::Diagonal, c, {}};
    }
    if (s.rfind("file:", 0) == 0 && s.size() > 5) return {Kind::File, 0.0, s.substr(5)};
    throw Error(ErrorKind::InvalidArgument, "shift must be zero, diag, diag:<c> or file:<path>");
  }

  std::string str() const {
    switch (kind) {
      case Kind::Zero: return "zero";
      case Kind::Diagonal: return "diag:" + format_number(scale);
      case Kind::File: return "file:" + path;
    }
    return "?";
  }
};

/// Reads an n x n matrix: one row per line, entries are complex literals.
inline ComplexMat read_matrix_file(const std::string& path, std::size_t n) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::InvalidArgument, "cannot read shift file " + path);
  const auto nn = static_cast<Eigen::Index>(n);
  ComplexMat m(nn, nn);
  std::string line;
  Eigen::Index row = 0;
  while (std::getline(f, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    if (row >= nn) throw Error(ErrorKind::DimensionMismatch, "shift file has more than n rows");
    std::istringstream is(line);
    std::string tok;
    Eigen::Index col = 0;
    while (is >> tok) {
      if (col >= nn) throw Error(ErrorKind::DimensionMismatch, "shift file row longer than n");
      m(row, col++) = EntryLaw::parse_complex(tok);
    }
    if (col != nn) throw Error(ErrorKind::DimensionMismatch, "shift file row shorter than n");
    ++row;
  }
  if (row != nn) throw Error(ErrorKind::DimensionMismatch, "shift file has fewer than n rows");
  return m;
}

inline ComplexMat make_shift(const ShiftSpec& spec, std::size_t n) {
  const auto nn = static_cast<Eigen::Index>(n);
  switch (spec.kind) {
    case ShiftSpec::Kind::Zero: return ComplexMat::Zero(nn, nn);
    case ShiftSpec::Kind::Diagonal: {
      ComplexMat m = ComplexMat::Zero(nn, nn);
      m.diagonal().setConstant(Complex(spec.scale * std::pow(static_cast<double>(n), 0.51), 0.0));
      return m;
    }
    case ShiftSpec::Kind::File: return read_matrix_file(spec.path, n);
  }
  return ComplexMat::Zero(nn, nn);
}

/// K log-spaced values from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t k) {
  if (!(lo > 0.0 && hi >= lo && k >= 1)) throw Error(ErrorKind::InvalidArgument, "log grid needs 0 < lo <= hi, K >= 1");
  if (k == 1) return {lo};
  std::vector<double> out(k);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < k; ++i)
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(k - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void require_seed(const std::optional<std::uint64_t>& seed) {
  if (!seed) throw Error(ErrorKind::InvalidArgument, "seed is required");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tail of the least singular value

struct TailConfig {
  std::size_t n = 64;
  EntryLaw law = EntryLaw::complex_gaussian();
  ShiftSpec shift;
  std::vector<double> eta = log_grid(1e-4, 1e-1, 16);
  std::size_t trials = 4000;
  std::optional<std::uint64_t> seed;
  double fit_lo = 1e-4;
  double fit_hi = 1e-2;
  std::uint64_t min_fit_count = 20;
  bool strict_shift = false;
  unsigned threads = 0;
};

struct TailPoint {
  double eta = 0.0;
  std::uint64_t count = 0;
  double probability = 0.0;
  Interval ci;
};

struct TailCurve {
  std::vector<TailPoint> points;
  std::size_t trials_used = 0;
  std::size_t failures = 0;
  std::optional<LineFit> fit;  // log p against log eta
  double envelope_c = 0.0;     // smallest C with p(eta) <= C n^{5/2} eta on the grid

  bool monotone() const {
    for (std::size_t i = 1; i < points.size(); ++i)
      if (points[i].probability < points[i - 1].probability) return false;
    return true;
  }
  bool below_envelope(double c) const { return envelope_c <= c; }
};

struct TailResult {
  TailCurve curve;
  std::vector<double> s_n;  // NaN for failed trials, indexed by stream_id
  std::vector<TrialRecord> records;
};

/// Builds the curve from least singular values; NaN entries count as failures.
inline TailCurve tail_curve(const std::vector<double>& s_n, const std::vector<double>& eta, std::size_t n,
                            double fit_lo, double fit_hi, std::uint64_t min_fit_count) {
  for (std::size_t i = 0; i < eta.size(); ++i)
    if (!(eta[i] >= 0.0) || (i && eta[i] <= eta[i - 1]))
      throw Error(ErrorKind::InvalidArgument, "eta grid must be nonnegative and ascending");
  TailCurve c;
  std::vector<double> valid;
  for (double s : s_n) {
    if (std::isnan(s))
      ++c.failures;
    else
      valid.push_back(s);
  }
  std::sort(valid.begin(), valid.end());
  c.trials_used = valid.size();
  const double scale = std::pow(static_cast<double>(n), 2.5);
  std::vector<double> fx, fy;
  for (double e : eta) {
    TailPoint p;
    p.eta = e;
    p.count = static_cast<std::uint64_t>(std::upper_bound(valid.begin(), valid.end(), e) - valid.begin());
    p.probability = valid.empty() ? 0.0 : static_cast<double>(p.count) / static_cast<double>(valid.size());
    p.ci = wilson_interval(p.count, valid.size());
    if (e > 0.0) c.envelope_c = std::max(c.envelope_c, p.probability / (scale * e));
    if (e >= fit_lo * (1 - 1e-12) && e <= fit_hi * (1 + 1e-12) && p.count >= min_fit_count && p.count > 0) {
      fx.push_back(std::log(e));
      fy.push_back(std::log(p.probability));
    }
    c.points.push_back(p);
  }
  c.fit = least_squares(fx, fy);
  return c;
}

inline TailResult tail_experiment(const TailConfig& cfg) {
  detail::require_seed(cfg.seed);
  if (cfg.trials < 1) throw Error(ErrorKind::InvalidArgument, "trials must be >= 1");
  if (cfg.n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
  const ComplexMat shift = make_shift(cfg.shift, cfg.n);
  const std::uint64_t seed = *cfg.seed;
  TailResult out;
  out.s_n.assign(cfg.trials, 0.0);
  std::vector<double> residual(cfg.trials, 0.0), wall(cfg.trials, 0.0);
  parallel_for(
      cfg.trials,
      [&](std::size_t t) {
        const auto t0 = std::chrono::steady_clock::now();
        RandomStream stream(seed, t);
        const auto sample = sample_ensemble(cfg.n, shift, cfg.law, stream, cfg.strict_shift);
        try {
          const auto sv = singular_values(sample.composite);
          double ss = 0.0;
          for (double s : sv) ss += s * s;
          const double fro = sample.composite.squaredNorm();
          residual[t] = fro > 0.0 ? std::abs(ss - fro) / fro : ss;
          out.s_n[t] = residual[t] < 1e-8 ? sv.back() : std::numeric_limits<double>::quiet_NaN();
        } catch (const Error&) {
          out.s_n[t] = std::numeric_limits<double>::quiet_NaN();
        }
        wall[t] = detail::seconds_since(t0);
      },
      cfg.threads);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const bool ok = !std::isnan(out.s_n[t]);
    out.records.push_back({"tail", cfg.n, cfg.law.name(), seed, t, ok ? "s_n" : "backend_failure_residual",
                           ok ? out.s_n[t] : residual[t], wall[t]});
  }
  out.curve = tail_curve(out.s_n, cfg.eta, cfg.n, cfg.fit_lo, cfg.fit_hi, cfg.min_fit_count);
  return out;
}

inline CsvTable tail_table(const TailCurve& c) {
  CsvTable t{{"eta", "count", "trials", "probability", "ci_lo", "ci_hi"}, {}};
  for (const auto& p : c.points)
    t.add({format_number(p.eta), std::to_string(p.count), std::to_string(c.trials_used),
           format_number(p.probability), format_number(p.ci.lo), format_number(p.ci.hi)});
  return t;
}

inline std::string tail_svg(const TailCurve& c, std::size_t n) {
  std::vector<LogLogPoint> pts;
  for (const auto& p : c.points) pts.push_back({p.eta, p.probability, p.ci.lo, p.ci.hi});
  return svg_loglog(pts, "eta", "Pr(s_n <= eta)", "least singular value tail, n = " + std::to_string(n));
}

// ---------------------------------------------------------------------------
// Invertibility on a single vector

enum class TestVector { E1, E1MinusE2, Flat };

inline TestVector parse_test_vector(std::string_view s) {
  if (s == "e1") return TestVector::E1;
  if (s == "e1-e2") return TestVector::E1MinusE2;
  if (s == "flat") return TestVector::Flat;
  throw Error(ErrorKind::InvalidArgument, "vector must be e1, e1-e2 or flat");
}

inline const char* to_string(TestVector v) {
  switch (v) {
    case TestVector::E1: return "e1";
    case TestVector::E1MinusE2: return "e1-e2";
    case TestVector::Flat: return "flat";
  }
  return "?";
}

inline ComplexVec make_test_vector(TestVector kind, std::size_t n) {
  const auto nn = static_cast<Eigen::Index>(n);
  ComplexVec v = ComplexVec::Zero(nn);
  switch (kind) {
    case TestVector::E1: v[0] = 1.0; break;
    case TestVector::E1MinusE2:
      if (n < 2) throw Error(ErrorKind::InvalidArgument, "e1-e2 needs n >= 2");
      v[0] = std::numbers::sqrt2 / 2;
      v[1] = -std::numbers::sqrt2 / 2;
      break;
    case TestVector::Flat: v.setConstant(1.0 / std::sqrt(static_cast<double>(n))); break;
  }
  return v;
}

struct SingleVectorConfig {
  std::vector<std::size_t> ns;
  EntryLaw law = EntryLaw::real_rademacher();
  TestVector vector = TestVector::E1MinusE2;
  ShiftSpec shift{ShiftSpec::Kind::Zero, 0.0, {}};
  double c = 0.1;
  std::size_t trials = 100000;
  std::optional<std::uint64_t> seed;
  std::uint64_t min_fit_count = 1;
  unsigned threads = 0;
};

struct SingleVectorPoint {
  std::size_t n = 0;
  std::uint64_t count = 0;
  std::size_t trials = 0;
  double q = 0.0;
  Interval ci;
};

struct SingleVectorReport {
  std::vector<SingleVectorPoint> points;
  std::optional<LineFit> fit;  // log q_n against n
  std::vector<TrialRecord> records;
};

inline std::uint64_t single_vector_stream_id(std::size_t n, std::size_t trial) {
  return (static_cast<std::uint64_t>(n) << 32) | static_cast<std::uint64_t>(trial);
}

/// q_n = Pr(||(M + N_n) v||_2 <= c sqrt(n)). Only the columns of N_n on the
/// support of v are drawn (column-major within the support), since the
/// remaining columns do not affect N_n v. Per-trial records are written for
/// the trials where the event occurs; each n also gets a summary record.
inline SingleVectorReport single_vector_experiment(const SingleVectorConfig& cfg) {
  detail::require_seed(cfg.seed);
  if (cfg.ns.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one n");
  if (cfg.trials < 1) throw Error(ErrorKind::InvalidArgument, "trials must be >= 1");
  if (!(cfg.c > 0.0)) throw Error(ErrorKind::InvalidArgument, "c must be positive");
  const std::uint64_t seed = *cfg.seed;
  SingleVectorReport rep;
  std::vector<double> fx, fy;
  for (std::size_t n : cfg.ns) {
    const ComplexVec v = make_test_vector(cfg.vector, n);
    if (std::abs(v.norm() - 1.0) > 1e-12) throw Error(ErrorKind::NotUnit, "test vector is not unit");
    std::vector<Eigen::Index> supp;
    for (Eigen::Index j = 0; j < v.size(); ++j)
      if (v[j] != Complex(0.0, 0.0)) supp.push_back(j);
    const ComplexVec mv = make_shift(cfg.shift, n) * v;
    const double threshold = cfg.c * std::sqrt(static_cast<double>(n));
    std::vector<double> norms(cfg.trials);
    parallel_for(
        cfg.trials,
        [&](std::size_t t) {
          RandomStream stream(seed, single_vector_stream_id(n, t));
          ComplexVec y = mv;
          for (Eigen::Index j : supp)
            for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) y[i] += cfg.law.sample(stream) * v[j];
          norms[t] = y.norm();
        },
        cfg.threads);
    SingleVectorPoint p;
    p.n = n;
    p.trials = cfg.trials;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      if (norms[t] <= threshold) {
        ++p.count;
        rep.records.push_back({"single-vector", n, cfg.law.name(), seed, single_vector_stream_id(n, t),
                               "norm_below_threshold", norms[t], 0.0});
      }
    }
    p.q = static_cast<double>(p.count) / static_cast<double>(p.trials);
    p.ci = wilson_interval(p.count, p.trials);
    rep.records.push_back({"single-vector", n, cfg.law.name(), seed, single_vector_stream_id(n, cfg.trials), "q_n",
                           p.q, 0.0});
    if (p.count >= cfg.min_fit_count && p.count > 0) {
      fx.push_back(static_cast<double>(n));
      fy.push_back(std::log(p.q));
    }
    rep.points.push_back(p);
  }
  rep.fit = least_squares(fx, fy);
  return rep;
}

inline CsvTable single_vector_table(const SingleVectorReport& r) {
  CsvTable t{{"n", "count", "trials", "q", "ci_lo", "ci_hi"}, {}};
  for (const auto& p : r.points)
    t.add({std::to_string(p.n), std::to_string(p.count), std::to_string(p.trials), format_number(p.q),
           format_number(p.ci.lo), format_number(p.ci.hi)});
  return t;
}

// ---------------------------------------------------------------------------
// Empirical spectral distribution

/// Area of [x0, x1] x [y0, y1] intersected with the closed unit disc.
inline double rect_disc_area(double x0, double x1, double y0, double y1) {
  // F(x, y): area of {0 <= u <= x, 0 <= w <= y, u^2 + w^2 <= 1} for x, y >= 0.
  auto quadrant = [](double x, double y) {
    x = std::min(x, 1.0);
    y = std::min(y, 1.0);
    if (x <= 0.0 || y <= 0.0) return 0.0;
    if (x * x + y * y <= 1.0) return x * y;
    const double u = std::sqrt(1.0 - y * y);  // where the arc crosses height y
    auto prim = [](double t) { return 0.5 * (t * std::sqrt(std::max(0.0, 1.0 - t * t)) + std::asin(t)); };
    return y * u + prim(x) - prim(u);
  };
  auto signed_f = [&](double x, double y) {
    const double s = (x < 0 ? -1.0 : 1.0) * (y < 0 ? -1.0 : 1.0);
    return s * quadrant(std::abs(x), std::abs(y));
  };
  return signed_f(x1, y1) - signed_f(x0, y1) - signed_f(x1, y0) + signed_f(x0, y0);
}

/// Fraction of points with modulus at most r.
inline double radial_cdf(const std::vector<Complex>& points, double r) {
  if (points.empty()) return 0.0;
  std::size_t k = 0;
  for (const auto& z : points)
    if (std::abs(z) <= r) ++k;
  return static_cast<double>(k) / static_cast<double>(points.size());
}

struct EsdHistogram {
  std::size_t n = 0;
  std::vector<Complex> eigenvalues;  // scaled by 1 / (sigma sqrt(n))
  std::size_t cells = 10;
  double extent = 1.5;
  std::vector<std::uint64_t> counts;  // row-major, cells x cells, bottom-left first
  std::uint64_t outside = 0;          // points outside the grid; counts sum to n - outside
  double discrepancy = 0.0;           // max over cells of |mu_n(cell) - mu_inf(cell)|
  std::vector<double> radial_r, radial_f;
  double mean_modulus = 0.0;  // |mean of the eigenvalues|
};

inline EsdHistogram esd_from_points(const std::vector<Complex>& points, std::size_t cells = 10, double extent = 1.5,
                                    std::size_t radial_points = 30) {
  if (cells < 1 || !(extent > 0.0)) throw Error(ErrorKind::InvalidArgument, "need cells >= 1 and extent > 0");
  EsdHistogram h;
  h.n = points.size();
  h.eigenvalues = points;
  h.cells = cells;
  h.extent = extent;
  h.counts.assign(cells * cells, 0);
  const double side = 2.0 * extent / static_cast<double>(cells);
  Complex mean{0.0, 0.0};
  for (const auto& z : points) {
    mean += z;
    const double fx = (z.real() + extent) / side, fy = (z.imag() + extent) / side;
    if (fx < 0.0 || fy < 0.0 || fx > static_cast<double>(cells) || fy > static_cast<double>(cells)) {
      ++h.outside;
      continue;
    }
    const auto ix = std::min(cells - 1, static_cast<std::size_t>(fx));
    const auto iy = std::min(cells - 1, static_cast<std::size_t>(fy));
    ++h.counts[iy * cells + ix];
  }
  if (!points.empty()) h.mean_modulus = std::abs(mean / static_cast<double>(points.size()));
  const double total = std::max<double>(1.0, static_cast<double>(points.size()));
  for (std::size_t iy = 0; iy < cells; ++iy)
    for (std::size_t ix = 0; ix < cells; ++ix) {
      const double x0 = -extent + side * static_cast<double>(ix), y0 = -extent + side * static_cast<double>(iy);
      const double ref = rect_disc_area(x0, x0 + side, y0, y0 + side) / std::numbers::pi;
      const double emp = static_cast<double>(h.counts[iy * cells + ix]) / total;
      h.discrepancy = std::max(h.discrepancy, std::abs(emp - ref));
    }
  for (std::size_t k = 1; k <= radial_points; ++k) {
    const double r = extent * static_cast<double>(k) / static_cast<double>(radial_points);
    h.radial_r.push_back(r);
    h.radial_f.push_back(radial_cdf(points, r));
  }
  return h;
}

struct EsdConfig {
  std::size_t n = 512;
  EntryLaw law = EntryLaw::complex_gaussian();
  std::optional<std::uint64_t> seed;
  std::uint64_t stream_id = 0;
  std::size_t cells = 10;
  double extent = 1.5;
  std::size_t radial_points = 30;
};

inline constexpr std::size_t kMaxEsdDimension = 1024;

struct EsdResult {
  EsdHistogram histogram;
  std::vector<TrialRecord> records;
};

/// Eigenvalues of N_n / sqrt(n); entry laws have variance 1 by construction.
inline EsdResult esd_experiment(const EsdConfig& cfg) {
  detail::require_seed(cfg.seed);
  if (cfg.n < 1 || cfg.n > kMaxEsdDimension) throw Error(ErrorKind::DimensionTooLarge, "esd needs 1 <= n <= 1024");
  const auto t0 = std::chrono::steady_clock::now();
  RandomStream stream(*cfg.seed, cfg.stream_id);
  const auto nn = static_cast<Eigen::Index>(cfg.n);
  const auto sample = sample_ensemble(cfg.n, ComplexMat::Zero(nn, nn), cfg.law, stream);
  auto ev = eigenvalues(sample.noise / std::sqrt(static_cast<double>(cfg.n)));
  EsdResult out;
  out.histogram = esd_from_points(ev, cfg.cells, cfg.extent, cfg.radial_points);
  const double wall = detail::seconds_since(t0);
  const auto& h = out.histogram;
  const std::string law = cfg.law.name();
  out.records.push_back({"esd", cfg.n, law, *cfg.seed, cfg.stream_id, "discrepancy", h.discrepancy, wall});
  out.records.push_back({"esd", cfg.n, law, *cfg.seed, cfg.stream_id, "radial_cdf_half", radial_cdf(ev, 0.5), wall});
  out.records.push_back({"esd", cfg.n, law, *cfg.seed, cfg.stream_id, "mean_modulus", h.mean_modulus, wall});
  return out;
}

inline CsvTable esd_table(const EsdHistogram& h) {
  CsvTable t{{"r", "empirical_cdf", "limit_cdf"}, {}};
  for (std::size_t k = 0; k < h.radial_r.size(); ++k)
    t.add({format_number(h.radial_r[k]), format_number(h.radial_f[k]),
           format_number(std::min(1.0, h.radial_r[k] * h.radial_r[k]))});
  return t;
}

inline CsvTable esd_eigenvalue_table(const EsdHistogram& h) {
  CsvTable t{{"re", "im"}, {}};
  for (const auto& z : h.eigenvalues) t.add({format_number(z.real()), format_number(z.imag())});
  return t;
}

// ---------------------------------------------------------------------------
// Operator-norm control

struct NormControlConfig {
  std::size_t n = 256;
  double epsilon = 0.01;
  std::size_t trials = 200;
  EntryLaw law = EntryLaw::complex_gaussian();
  std::vector<double> deltas{0.2, 0.6};
  std::size_t perm_n = 12;
  std::size_t perm_trials = 10000;
  double perm_constant = 20.0;
  std::size_t a4_m = 12;
  std::size_t a4_trials = 100000;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

struct RestrictedNormPart {
  double delta = 0.0;
  std::size_t columns = 0;           // |J| = ceil(n^{1 - delta})
  std::vector<std::size_t> excluded; // rows dropped by the selection, per trial
  std::vector<double> ratio;         // inf_to_2_upper(P_I N P_J) / n^{1 + eps - delta / 2}
  double ratio_q99 = 0.0;
};

struct NormControlReport {
  std::size_t n = 0;
  double epsilon = 0.0;
  // part 1
  double excluded_limit = 0.0;  // 2 n^{1 - eps}
  std::vector<std::size_t> excluded;
  std::vector<double> ratio;  // inf_to_2_upper(P_I N) / n^{1 + eps}
  std::size_t part1_success = 0;
  Interval success_ci;
  double ratio_q99 = 0.0;  // empirical stand-in for C(eps)
  // part 2
  std::vector<RestrictedNormPart> restricted;
  // permuted rows of a fixed matrix
  ComplexMat perm_base;
  double perm_threshold = 0.0;  // perm_constant sqrt(m n) n^eps
  double perm_max = 0.0;
  // tail of f(pi) around its mean
  double a4_y_norm = 0.0;
  std::vector<double> a4_t, a4_tail, a4_bound;
  bool a4_dominated = true;
  std::vector<TrialRecord> records;
};

namespace detail {

constexpr std::uint64_t kPart2Stream = 1ULL << 40;
constexpr std::uint64_t kPermBaseStream = 2ULL << 40;
constexpr std::uint64_t kPermStream = 3ULL << 40;
constexpr std::uint64_t kA4Stream = 4ULL << 40;

/// n x m matrix from the law whose rows all satisfy the selection thresholds
/// at level eps (rows are redrawn until they do).
inline ComplexMat conforming_matrix(std::size_t n, std::size_t m, double eps, const EntryLaw& law,
                                    RandomStream& stream) {
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  const double bound = std::pow(nn, eps) * std::sqrt(mm);
  ComplexMat b(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw Error(ErrorKind::PreconditionViolated, "could not draw a conforming row");
      for (Eigen::Index j = 0; j < b.cols(); ++j) b(i, j) = law.sample(stream);
      if (b.row(i).norm() <= bound && std::abs(b.row(i).sum()) <= bound) break;
    }
  }
  return b;
}

}  // namespace detail

inline NormControlReport norm_control_experiment(const NormControlConfig& cfg) {
  detail::require_seed(cfg.seed);
  if (cfg.n < 2 || cfg.trials < 1) throw Error(ErrorKind::InvalidArgument, "need n >= 2 and trials >= 1");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 0.5)) throw Error(ErrorKind::InvalidArgument, "epsilon must lie in (0, 1/2)");
  if (cfg.perm_n > kMaxExhaustiveColumns) throw Error(ErrorKind::DimensionTooLarge, "permutation size above 20");
  const std::uint64_t seed = *cfg.seed;
  const std::string law = cfg.law.name();
  const double n = static_cast<double>(cfg.n);
  const auto nn = static_cast<Eigen::Index>(cfg.n);
  NormControlReport rep;
  rep.n = cfg.n;
  rep.epsilon = cfg.epsilon;

  // Part 1: all columns.
  rep.excluded_limit = 2.0 * std::pow(n, 1.0 - cfg.epsilon);
  rep.excluded.assign(cfg.trials, 0);
  rep.ratio.assign(cfg.trials, 0.0);
  const double norm1 = std::pow(n, 1.0 + cfg.epsilon);
  parallel_for(
      cfg.trials,
      [&](std::size_t t) {
        RandomStream stream(seed, t);
        const auto s = sample_ensemble(cfg.n, ComplexMat::Zero(nn, nn), cfg.law, stream);
        const auto sel = select_good_rows(s.noise, cfg.epsilon);
        rep.excluded[t] = sel.excluded();
        rep.ratio[t] = inf_to_2_upper(project_rows(s.noise, sel)) / norm1;
      },
      cfg.threads);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    if (static_cast<double>(rep.excluded[t]) <= rep.excluded_limit) ++rep.part1_success;
    rep.records.push_back({"norms", cfg.n, law, seed, t, "excluded_rows", static_cast<double>(rep.excluded[t]), 0.0});
    rep.records.push_back({"norms", cfg.n, law, seed, t, "upper_ratio", rep.ratio[t], 0.0});
  }
  rep.success_ci = wilson_interval(rep.part1_success, cfg.trials);
  rep.ratio_q99 = quantile(rep.ratio, 0.99);

  // Part 2: a random column subset J of size ceil(n^{1 - delta}).
  for (std::size_t d = 0; d < cfg.deltas.size(); ++d) {
    RestrictedNormPart part;
    part.delta = cfg.deltas[d];
    if (!(part.delta > 0.0 && part.delta < 1.0)) throw Error(ErrorKind::InvalidArgument, "delta must lie in (0, 1)");
    part.columns = std::max<std::size_t>(1, ceil_power(cfg.n, 1.0 - part.delta));
    part.excluded.assign(cfg.trials, 0);
    part.ratio.assign(cfg.trials, 0.0);
    const double norm2 = std::pow(n, 1.0 + cfg.epsilon - 0.5 * part.delta);
    parallel_for(
        cfg.trials,
        [&](std::size_t t) {
          RandomStream stream(seed, detail::kPart2Stream + d * cfg.trials + t);
          const auto s = sample_ensemble(cfg.n, ComplexMat::Zero(nn, nn), cfg.law, stream);
          const auto cols = selection_from_indices(random_subset(cfg.n, part.columns, stream), cfg.n);
          const ComplexMat a = restrict_cols(s.noise, cols);
          const auto sel = select_good_rows(a, cfg.epsilon);
          part.excluded[t] = sel.excluded();
          part.ratio[t] = inf_to_2_upper(project_rows(a, sel)) / norm2;
        },
        cfg.threads);
    for (std::size_t t = 0; t < cfg.trials; ++t)
      rep.records.push_back({"norms", cfg.n, law, seed, detail::kPart2Stream + d * cfg.trials + t,
                             "restricted_upper_ratio:delta=" + format_number(part.delta), part.ratio[t], 0.0});
    part.ratio_q99 = quantile(part.ratio, 0.99);
    rep.restricted.push_back(std::move(part));
  }

  // Independent row permutations of one conforming matrix, exhaustive sign norm.
  if (cfg.perm_n > 0 && cfg.perm_trials > 0) {
    RandomStream base_stream(seed, detail::kPermBaseStream);
    rep.perm_base = detail::conforming_matrix(cfg.perm_n, cfg.perm_n, cfg.epsilon, cfg.law, base_stream);
    const double pn = static_cast<double>(cfg.perm_n);
    rep.perm_threshold = cfg.perm_constant * std::sqrt(pn * pn) * std::pow(pn, cfg.epsilon);
    std::vector<double> norms(cfg.perm_trials);
    parallel_for(
        cfg.perm_trials,
        [&](std::size_t t) {
          RandomStream stream(seed, detail::kPermStream + t);
          norms[t] = inf_to_2_sign_norm(permute_rows_independently(rep.perm_base, stream)).value;
        },
        cfg.threads);
    for (std::size_t t = 0; t < cfg.perm_trials; ++t) {
      rep.perm_max = std::max(rep.perm_max, norms[t]);
      rep.records.push_back({"norms", cfg.perm_n, law, seed, detail::kPermStream + t, "permuted_sign_norm", norms[t], 0.0});
    }
  }

  // |f(pi) - E f| for a fixed y and sign vector v.
  if (cfg.a4_m > 0 && cfg.a4_trials > 0) {
    RandomStream setup(seed, detail::kA4Stream);
    const ComplexVec y = EntryLaw::complex_gaussian().sample(setup, cfg.a4_m);
    std::vector<int> v(cfg.a4_m);
    for (auto& s : v) s = setup.below(2) ? 1 : -1;
    const Complex mean = permutation_statistic_mean(v, y);
    rep.a4_y_norm = y.norm();
    std::vector<double> dev(cfg.a4_trials);
    parallel_for(
        cfg.a4_trials,
        [&](std::size_t t) {
          RandomStream stream(seed, detail::kA4Stream + 1 + t);
          dev[t] = std::abs(permutation_statistic(v, y, stream.permutation(cfg.a4_m)) - mean);
        },
        cfg.threads);
    for (std::size_t t = 0; t < cfg.a4_trials; ++t)
      rep.records.push_back({"norms", cfg.a4_m, "permutation", seed, detail::kA4Stream + 1 + t, "abs_deviation", dev[t], 0.0});
    for (double mult : {1.0, 2.0, 3.0}) {
      const double t = mult * rep.a4_y_norm;
      const auto hits = static_cast<double>(std::count_if(dev.begin(), dev.end(), [&](double d) { return d >= t; }));
      const double tail = hits / static_cast<double>(cfg.a4_trials);
      const double bound = 4.0 * std::exp(-t * t / (128.0 * rep.a4_y_norm * rep.a4_y_norm));
      rep.a4_t.push_back(t);
      rep.a4_tail.push_back(tail);
      rep.a4_bound.push_back(bound);
      if (tail > bound) rep.a4_dominated = false;
    }
  }
  return rep;
}

inline CsvTable norm_control_table(const NormControlReport& r) {
  CsvTable t{{"quantity", "value"}, {}};
  t.add({"n", std::to_string(r.n)});
  t.add({"epsilon", format_number(r.epsilon)});
  t.add({"excluded_limit", format_number(r.excluded_limit)});
  t.add({"part1_success", std::to_string(r.part1_success)});
  t.add({"part1_trials", std::to_string(r.excluded.size())});
  t.add({"part1_success_ci_lo", format_number(r.success_ci.lo)});
  t.add({"part1_ratio_q99", format_number(r.ratio_q99)});
  for (const auto& p : r.restricted) {
    t.add({"part2_columns:delta=" + format_number(p.delta), std::to_string(p.columns)});
    t.add({"part2_ratio_q99:delta=" + format_number(p.delta), format_number(p.ratio_q99)});
  }
  t.add({"perm_threshold", format_number(r.perm_threshold)});
  t.add({"perm_max_sign_norm", format_number(r.perm_max)});
  for (std::size_t k = 0; k < r.a4_t.size(); ++k) {
    t.add({"a4_tail:t=" + format_number(r.a4_t[k]), format_number(r.a4_tail[k])});
    t.add({"a4_bound:t=" + format_number(r.a4_t[k]), format_number(r.a4_bound[k])});
  }
  return t;
}

// ---------------------------------------------------------------------------
// LCD classes and the rounding decomposition on sampled vectors

enum class VectorSource { Planted, Random, SqrtRamp };

inline VectorSource parse_vector_source(std::string_view s) {
  if (s == "planted") return VectorSource::Planted;
  if (s == "random") return VectorSource::Random;
  if (s == "sqrt") return VectorSource::SqrtRamp;
  throw Error(ErrorKind::InvalidArgument, "source must be planted, random or sqrt");
}

struct PlantedVector {
  ComplexVec a;  // unit vector
  ComplexVec w;  // planted lattice point
  double scale = 0.0;  // ||w + e||; scale * a - w = e
};

/// a = (w + e) / ||w + e|| with w a nonzero Gaussian-integer vector with parts
/// in [-3, 3] and ||e|| = min(gamma ||w||, alpha) / 2, so theta = ||w + e||
/// witnesses LCD(a) <= ||w + e||.
inline PlantedVector planted_gamma2_vector(std::size_t n, double gamma, double alpha, RandomStream& stream) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
  const auto nn = static_cast<Eigen::Index>(n);
  PlantedVector p;
  p.w = ComplexVec::Zero(nn);
  while (support_size(p.w) == 0)
    for (Eigen::Index i = 0; i < nn; ++i)
      p.w[i] = Complex(static_cast<double>(stream.below(7)) - 3.0, static_cast<double>(stream.below(7)) - 3.0);
  ComplexVec e(nn);
  for (Eigen::Index i = 0; i < nn; ++i) e[i] = Complex(stream.normal(), stream.normal());
  e *= 0.5 * std::min(gamma * p.w.norm(), alpha) / e.norm();
  const ComplexVec x = p.w + e;
  p.scale = x.norm();
  p.a = x / p.scale;
  return p;
}

/// (1, sqrt 2, ..., sqrt n) / norm.
inline ComplexVec sqrt_ramp_vector(std::size_t n) {
  ComplexVec a(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) a[static_cast<Eigen::Index>(i)] = std::sqrt(static_cast<double>(i + 1));
  return a / a.norm();
}

struct GammaTailConfig {
  std::size_t n = 64;
  std::size_t samples = 100;
  double eta = 1e-2;
  VectorSource source = VectorSource::Planted;
  std::optional<double> gamma;  // default n^{-1/2}
  std::optional<double> alpha;  // default n^{0.01}
  double theta_max = 0.0;       // 0: 1.05 ||w + e|| for planted vectors, the class threshold otherwise
  double step = 1e-3;
  int depth = 6;
  EntryLaw law = EntryLaw::real_rademacher();
  std::size_t rho_trials = 10000;
  double c_bound = 1.0;
  bool strict_range = false;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

inline constexpr std::size_t kMaxGammaTailDimension = 64;

struct GammaSampleOutcome {
  GammaClass cls = GammaClass::Undetermined;
  double lcd_estimate = 0.0;
  double certified_lower = 0.0;
  bool decomposition_ok = true;  // Gamma2 only
  bool witness_norm_ok = true;   // ||w|| >= |theta| (1 - gamma), Gamma2 only
  std::string failure;
  double rho_hat = 0.0;  // Gamma1 only
  BoundValue bound;      // Gamma1 only
  bool rho_ok = true;
};

struct GammaTailReport {
  std::size_t n = 0;
  double gamma = 0.0, alpha = 0.0, eta = 0.0, threshold = 0.0;
  std::size_t gamma1 = 0, gamma2 = 0, undetermined = 0;
  std::size_t decomposition_failures = 0;
  std::size_t witness_norm_failures = 0;
  std::size_t rho_failures = 0;
  std::size_t vacuous_bounds = 0;
  std::vector<GammaSampleOutcome> outcomes;
  std::vector<TrialRecord> records;
};

inline GammaTailReport gamma_tail_experiment(const GammaTailConfig& cfg) {
  detail::require_seed(cfg.seed);
  if (cfg.n < 1 || cfg.n > kMaxGammaTailDimension) throw Error(ErrorKind::DimensionTooLarge, "gamma experiment needs 1 <= n <= 64");
  if (cfg.samples < 1) throw Error(ErrorKind::InvalidArgument, "samples must be >= 1");
  const double n = static_cast<double>(cfg.n);
  GammaTailReport rep;
  rep.n = cfg.n;
  rep.gamma = cfg.gamma.value_or(1.0 / std::sqrt(n));
  rep.alpha = cfg.alpha.value_or(std::pow(n, 0.01));
  rep.eta = cfg.eta;
  rep.threshold = std::pow(n, 0.7) / cfg.eta;
  const std::uint64_t seed = *cfg.seed;
  rep.outcomes.resize(cfg.samples);
  parallel_for(
      cfg.samples,
      [&](std::size_t i) {
        RandomStream stream(seed, i);
        LcdParams p;
        p.gamma = rep.gamma;
        p.alpha = rep.alpha;
        p.step = cfg.step;
        p.depth = cfg.depth;
        ComplexVec a;
        switch (cfg.source) {
          case VectorSource::Planted: {
            const auto planted = planted_gamma2_vector(cfg.n, rep.gamma, rep.alpha, stream);
            a = planted.a;
            p.theta_max = cfg.theta_max > 0.0 ? cfg.theta_max : 1.05 * planted.scale;
            break;
          }
          case VectorSource::Random: {
            a = EntryLaw::complex_gaussian().sample(stream, cfg.n);
            a /= a.norm();
            p.theta_max = cfg.theta_max > 0.0 ? cfg.theta_max : rep.threshold;
            break;
          }
          case VectorSource::SqrtRamp:
            a = sqrt_ramp_vector(cfg.n);
            p.theta_max = cfg.theta_max > 0.0 ? cfg.theta_max : rep.threshold;
            break;
        }
        auto& o = rep.outcomes[i];
        const auto cls = classify_gamma(a, cfg.eta, p, cfg.n, cfg.strict_range);
        o.cls = cls.cls;
        o.lcd_estimate = cls.lcd.infimum_estimate;
        o.certified_lower = cls.lcd.certified_lower;
        if (o.cls == GammaClass::Gamma2) {
          const Complex theta = *cls.lcd.theta;
          const ComplexVec& w = *cls.lcd.point;
          try {
            rounding_decomposition(a, theta, w, rep.gamma, rep.alpha);
          } catch (const std::exception& e) {
            o.decomposition_ok = false;
            o.failure = e.what();
          }
          o.witness_norm_ok = w.norm() >= std::abs(theta) * (1.0 - rep.gamma);
        } else if (o.cls == GammaClass::Gamma1) {
          const double delta = 2.0 * std::sqrt(n) * cfg.eta;
          o.rho_hat = rho_mc({a, delta, cfg.law}, cfg.rho_trials, stream).rho_hat;
          o.bound = lcd_rho_bound({delta, rep.alpha, rep.gamma, o.certified_lower, cfg.n, cfg.c_bound});
          o.rho_ok = o.rho_hat <= o.bound.value;
        }
      },
      cfg.threads);
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    const auto& o = rep.outcomes[i];
    switch (o.cls) {
      case GammaClass::Gamma1: ++rep.gamma1; break;
      case GammaClass::Gamma2: ++rep.gamma2; break;
      case GammaClass::Undetermined: ++rep.undetermined; break;
    }
    if (!o.decomposition_ok) ++rep.decomposition_failures;
    if (!o.witness_norm_ok) ++rep.witness_norm_failures;
    if (!o.rho_ok) ++rep.rho_failures;
    if (o.cls == GammaClass::Gamma1 && o.bound.vacuous) ++rep.vacuous_bounds;
    const double code = o.cls == GammaClass::Gamma1 ? 1.0 : o.cls == GammaClass::Gamma2 ? 2.0 : 0.0;
    rep.records.push_back({"gamma", cfg.n, cfg.law.name(), seed, i, "class", code, 0.0});
    rep.records.push_back({"gamma", cfg.n, cfg.law.name(), seed, i, "lcd_certified_lower", o.certified_lower, 0.0});
    if (o.cls == GammaClass::Gamma2)
      rep.records.push_back({"gamma", cfg.n, cfg.law.name(), seed, i, "lcd_estimate", o.lcd_estimate, 0.0});
    if (o.cls == GammaClass::Gamma1)
      rep.records.push_back({"gamma", cfg.n, cfg.law.name(), seed, i, "rho_hat", o.rho_hat, 0.0});
  }
  return rep;
}

}  // namespace rmt
