#pragma once

#include "rmt/ball_cover.hpp"
#include "rmt/core.hpp"
#include "rmt/entry_law.hpp"
#include "rmt/random.hpp"
#include "rmt/stats.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace rmt {

/// Weighted sum sum_i v_i z_i and a ball radius.
struct ConcentrationQuery {
  ComplexVec weights;
  double radius = 1.0;
  EntryLaw law = EntryLaw::real_rademacher();
};

enum class EstimateMethod { Exact, MonteCarlo };

struct ConcentrationEstimate {
  double rho_hat = 0.0;
  EstimateMethod method = EstimateMethod::Exact;
  Interval ci{0.0, 1.0};
  std::size_t centers_tried = 0;
  Complex best_center{0.0, 0.0};
};

inline constexpr double kExactEnumerationLimit = 1e7;

namespace detail {

inline void check_query(const ConcentrationQuery& q) {
  if (!(q.radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  if (!all_finite(q.weights)) throw Error(ErrorKind::InvalidArgument, "weights must be finite");
}

/// Exact law of sum_i v_i x_i for x_i i.i.d. from `atoms`, merging coincident
/// partial sums after every step.
inline std::vector<WeightedPoint> sum_distribution(const ComplexVec& v, const std::vector<Atom>& atoms) {
  double scale = 0.0, amax = 0.0;
  for (const auto& a : atoms) amax = std::max(amax, std::abs(a.value));
  for (Eigen::Index i = 0; i < v.size(); ++i) scale += std::abs(v[i]) * amax;
  const double resolution = 1e-11 * std::max(scale, 1.0);
  std::vector<WeightedPoint> dist{{Complex(0.0, 0.0), 1.0}};
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::vector<WeightedPoint> next;
    next.reserve(dist.size() * atoms.size());
    for (const auto& p : dist)
      for (const auto& a : atoms) next.push_back({p.z + v[i] * a.value, p.weight * a.prob.to_double()});
    dist = merge_points(next, resolution);
  }
  return dist;
}

inline void check_enumeration_size(std::size_t support, Eigen::Index n) {
  if (static_cast<double>(n) * std::log(static_cast<double>(support)) > std::log(kExactEnumerationLimit) + 1e-12)
    throw Error(ErrorKind::TooLargeForExact, "support^n exceeds 1e7");
}

}  // namespace detail

/// Exact Levy concentration sup_x Pr(|sum v_i z_i - x| <= r) for discrete laws.
inline ConcentrationEstimate rho_exact(const ConcentrationQuery& q) {
  detail::check_query(q);
  if (!q.law.is_discrete()) throw Error(ErrorKind::TooLargeForExact, "exact mode needs a discrete law");
  detail::check_enumeration_size(q.law.atoms().size(), q.weights.size());
  const auto dist = detail::sum_distribution(q.weights, q.law.atoms());
  const BallCover cover = max_ball_mass(dist, q.radius, true);
  ConcentrationEstimate est;
  est.rho_hat = std::min(1.0, cover.mass);
  est.method = EstimateMethod::Exact;
  est.ci = {est.rho_hat, est.rho_hat};
  est.centers_tried = cover.candidates;
  est.best_center = cover.center;
  return est;
}

/// Largest number of distinct sampled sums for which pair-boundary centers are
/// searched; above it only sampled points serve as centers.
inline constexpr std::size_t kPairCenterLimit = 4096;

/// Monte Carlo concentration estimate from `trials` sampled sums.
///
/// Centers come from the sample: every distinct sum, plus pair-boundary centers
/// while the number of distinct sums is at most kPairCenterLimit. Restricting
/// centers to the sample can only bias the estimate downward. The interval is a
/// Wilson interval at simultaneous 99% level over all k^2 candidate balls
/// (Bonferroni), so it also covers the upward bias from maximizing over centers.
inline ConcentrationEstimate rho_mc(const ConcentrationQuery& q, std::size_t trials, RandomStream& stream) {
  detail::check_query(q);
  if (trials < 1000) throw Error(ErrorKind::InvalidArgument, "rho_mc needs at least 1000 trials");
  std::vector<WeightedPoint> pts(trials);
  const double w = 1.0 / static_cast<double>(trials);
  for (auto& p : pts) {
    Complex s{0.0, 0.0};
    for (Eigen::Index i = 0; i < q.weights.size(); ++i) s += q.weights[i] * q.law.sample(stream);
    p = {s, w};
  }
  const auto merged = detail::merge_points(pts, detail::merge_resolution(pts));
  const bool pairs = merged.size() <= kPairCenterLimit;
  const BallCover cover = max_ball_mass(merged, q.radius, pairs);
  ConcentrationEstimate est;
  est.method = EstimateMethod::MonteCarlo;
  const auto hits = static_cast<std::uint64_t>(std::llround(cover.mass * static_cast<double>(trials)));
  est.rho_hat = static_cast<double>(hits) / static_cast<double>(trials);
  const double k = static_cast<double>(merged.size());
  const double candidates = pairs ? std::max(1.0, k * k) : std::max(1.0, k);
  const double z = normal_quantile(1.0 - 0.01 / (2.0 * candidates));
  est.ci = wilson_interval(hits, trials, z);
  est.centers_tried = cover.candidates;
  est.best_center = cover.center;
  return est;
}

struct BoundValue {
  double value = 0.0;  // clamped to [0, 1]
  double raw = 0.0;
  bool vacuous = false;  // raw >= 1
};

inline BoundValue clamp_bound(double raw) {
  return {std::clamp(raw, 0.0, 1.0), raw, raw >= 1.0};
}

/// Inputs of the Esseen-type bound on rho_{t, sum z_j}(1).
struct EsseenInputs {
  double t = 1.0;
  std::vector<double> t_j;
  std::vector<double> rho_tj;  // rho_{t_j, z_j}(1)
  double c_esseen = 1.0;
};

/// C t^2 (sum_j t_j^4 (1 - rho_j))^{-1/2}.
inline BoundValue esseen_bound(const EsseenInputs& in) {
  if (in.t_j.size() != in.rho_tj.size() || in.t_j.empty())
    throw Error(ErrorKind::InvalidArgument, "t_j and rho_tj must be non-empty and of equal length");
  if (!(in.c_esseen >= 1.0)) throw Error(ErrorKind::InvalidArgument, "Esseen constant must be >= 1");
  double tmax = 0.0, denom = 0.0;
  for (std::size_t j = 0; j < in.t_j.size(); ++j) {
    if (!(in.t_j[j] > 0.0)) throw Error(ErrorKind::InvalidArgument, "t_j must be positive");
    if (!(in.rho_tj[j] >= 0.0 && in.rho_tj[j] <= 1.0)) throw Error(ErrorKind::InvalidArgument, "rho_tj must lie in [0,1]");
    tmax = std::max(tmax, in.t_j[j]);
    const double t2 = in.t_j[j] * in.t_j[j];
    denom += t2 * t2 * (1.0 - in.rho_tj[j]);
  }
  if (!(in.t >= tmax)) throw Error(ErrorKind::InvalidArgument, "t must be >= max t_j");
  if (!(denom > 0.0)) throw Error(ErrorKind::DegenerateDenominator, "every rho_tj equals 1");
  return clamp_bound(in.c_esseen * in.t * in.t / std::sqrt(denom));
}

/// Distance from x to the nearest integer.
inline double dist_to_integer(double x) { return std::abs(x - std::round(x)); }

/// ||w||_z^2 = E || Re(w (z1 - z2)) ||_{R/Z}^2, exact over the difference
/// support for discrete laws, otherwise averaged over `trials` sampled pairs.
inline double torus_norm_sq(const Complex& w, const SymmetrizedLaw& sym, std::size_t trials = 100000,
                            std::optional<RandomStream> stream = std::nullopt) {
  if (sym.is_exact()) {
    double acc = 0.0;
    for (const auto& a : sym.difference_support()) {
      const double d = dist_to_integer((w * a.value).real());
      acc += a.prob.to_double() * d * d;
    }
    return acc;
  }
  RandomStream rs = stream.value_or(RandomStream(0, 0));
  std::vector<double> terms(trials);
  for (auto& t : terms) {
    const double d = dist_to_integer((w * sym.sample_difference(rs)).real());
    t = d * d;
  }
  return pairwise_sum(terms) / static_cast<double>(trials);
}

struct PzValue {
  double value = 0.0;
  EstimateMethod method = EstimateMethod::Exact;
  Interval ci{0.0, 1.0};
};

/// P_z(v) = E exp(-pi |sum v_i x_i|^2), x_i i.i.d. (z1 - z2) Ber(1/2).
inline PzValue p_z(const ComplexVec& v, const SymmetrizedLaw& sym, std::size_t trials, RandomStream& stream) {
  PzValue out;
  if (sym.is_exact() &&
      static_cast<double>(v.size()) * std::log(static_cast<double>(sym.support().size())) <=
          std::log(kExactEnumerationLimit)) {
    const auto dist = detail::sum_distribution(v, sym.support());
    std::vector<double> terms;
    terms.reserve(dist.size());
    for (const auto& p : dist) terms.push_back(p.weight * std::exp(-std::numbers::pi * std::norm(p.z)));
    out.value = pairwise_sum(terms);
    out.ci = {out.value, out.value};
    return out;
  }
  out.method = EstimateMethod::MonteCarlo;
  std::vector<double> terms(trials);
  double sq = 0.0;
  for (auto& t : terms) {
    Complex s{0.0, 0.0};
    for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i] * sym.sample(stream);
    t = std::exp(-std::numbers::pi * std::norm(s));
  }
  out.value = pairwise_sum(terms) / static_cast<double>(trials);
  for (double t : terms) sq += (t - out.value) * (t - out.value);
  const double se = std::sqrt(sq / static_cast<double>(trials) / static_cast<double>(std::max<std::size_t>(trials - 1, 1)));
  out.ci = {std::max(0.0, out.value - kZ99TwoSided * se), std::min(1.0, out.value + kZ99TwoSided * se)};
  return out;
}

struct QuadratureSpec {
  double radius = 6.0;
  double step = 0.01;
};

struct FourierBoundResult {
  double integral = 0.0;        // midpoint value at the requested step
  double coarse_integral = 0.0; // same rule at twice the step
  double error_estimate = 0.0;  // |fine - coarse| + tail + roundoff floor
  double tail_bound = 0.0;      // integral of exp(-pi |xi|^2) outside the box
  std::optional<double> p_z;    // exact P_z(v) when enumeration is feasible
  QuadratureSpec quadrature;

  double upper() const { return integral + error_estimate; }
};

namespace detail {

/// Tensor midpoint rule for the integrand over [-R, R]^2 with N = ceil(2R/h)
/// cells per side. Row sums are combined by pairwise summation so the result
/// is independent of threading.
inline double fourier_midpoint(const std::vector<Complex>& coeffs, const std::vector<double>& probs,
                               double radius, double step, unsigned threads) {
  const auto cells = static_cast<std::size_t>(std::ceil(2.0 * radius / step - 1e-9));
  const double h = 2.0 * radius / static_cast<double>(cells);
  std::vector<double> rows(cells);
  parallel_for(
      cells,
      [&](std::size_t a) {
        const double xr = -radius + (static_cast<double>(a) + 0.5) * h;
        std::vector<double> row(cells);
        for (std::size_t b = 0; b < cells; ++b) {
          const double xi = -radius + (static_cast<double>(b) + 0.5) * h;
          double e = 0.0;
          for (std::size_t k = 0; k < coeffs.size(); ++k) {
            const double d = dist_to_integer(xr * coeffs[k].real() - xi * coeffs[k].imag());
            e += probs[k] * d * d;
          }
          row[b] = std::exp(-0.5 * e - std::numbers::pi * (xr * xr + xi * xi));
        }
        rows[a] = pairwise_sum(row);
      },
      threads);
  return pairwise_sum(rows) * h * h;
}

}  // namespace detail

/// Integral over C of exp(-sum_i ||v_i xi||_z^2 / 2 - pi |xi|^2), which bounds
/// P_z(v) from above. The integrand is at most exp(-pi |xi|^2), so the part
/// outside [-R, R]^2 is bounded by exp(-pi R^2).
inline FourierBoundResult fourier_integral_bound(const ComplexVec& v, const SymmetrizedLaw& sym,
                                                 QuadratureSpec quad = {}, unsigned threads = 0) {
  if (!sym.is_exact()) throw Error(ErrorKind::InvalidArgument, "quadrature needs a discrete law");
  if (!(quad.radius > 0.0 && quad.step > 0.0)) throw Error(ErrorKind::InvalidArgument, "bad quadrature spec");
  // Re((v_i xi) d) = Re(xi * (v_i d)); precompute c = v_i d per (i, atom).
  std::vector<Complex> coeffs;
  std::vector<double> probs;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    for (const auto& a : sym.difference_support()) {
      coeffs.push_back(v[i] * a.value);
      probs.push_back(a.prob.to_double());
    }
  FourierBoundResult out;
  out.quadrature = quad;
  out.integral = detail::fourier_midpoint(coeffs, probs, quad.radius, quad.step, threads);
  out.coarse_integral = detail::fourier_midpoint(coeffs, probs, quad.radius, 2.0 * quad.step, threads);
  out.tail_bound = std::exp(-std::numbers::pi * quad.radius * quad.radius);
  out.error_estimate = std::abs(out.integral - out.coarse_integral) + out.tail_bound + 1e-12 * std::abs(out.integral);
  if (static_cast<double>(v.size()) * std::log(static_cast<double>(sym.support().size())) <=
      std::log(kExactEnumerationLimit)) {
    RandomStream unused(0, 0);
    out.p_z = p_z(v, sym, 0, unused).value;
  }
  return out;
}

struct LcdBoundQuery {
  double delta = 0.0;
  double alpha = 1.0;
  double gamma = 0.5;
  double lcd = 1.0;
  std::size_t n = 1;
  double c_bound = 1.0;
};

/// C (sqrt(n) delta / gamma + exp(-alpha^2 / C)), valid for
/// delta >= n^0.1 alpha / LCD.
inline BoundValue lcd_rho_bound(const LcdBoundQuery& q) {
  if (!(q.gamma > 0.0 && q.gamma < 1.0)) throw Error(ErrorKind::InvalidArgument, "gamma must lie in (0,1)");
  if (!(q.alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "alpha must be positive");
  if (!(q.c_bound >= 1.0)) throw Error(ErrorKind::InvalidArgument, "bound constant must be >= 1");
  if (!(q.lcd > 0.0)) throw Error(ErrorKind::InvalidArgument, "lcd must be positive");
  const double n = static_cast<double>(q.n);
  if (!(q.alpha < std::sqrt(n))) throw Error(ErrorKind::PreconditionViolated, "alpha must be below sqrt(n)");
  const double floor =std::pow(n, 0.1) * q.alpha / q.lcd;
  if (!(q.delta >= floor))
    throw Error(ErrorKind::PreconditionViolated,
                "delta " + std::to_string(q.delta) + " below n^0.1 alpha / lcd = " + std::to_string(floor));
  const double raw = q.c_bound * (std::sqrt(n) * q.delta / q.gamma + std::exp(-q.alpha * q.alpha / q.c_bound));
  return clamp_bound(raw);
}

}  // namespace rmt
