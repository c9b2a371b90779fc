#pragma once

#include "rmt/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace rmt {

struct LcdParams {
  double gamma = 0.1;
  double alpha = 0.5;
  double theta_max = 10.0;
  double step = 1e-3;  // coarse resolution
  int depth = 6;       // halvings below `step`

  double final_step() const { return std::ldexp(step, -depth); }
};

struct LcdResult {
  double infimum_estimate = std::numeric_limits<double>::infinity();
  double certified_lower = 0.0;
  std::optional<Complex> theta;    // witness multiplier
  std::optional<ComplexVec> point; // witness lattice vector (nonzero)
  double achieved_distance = std::numeric_limits<double>::infinity();
  bool exhausted = false;  // no witness up to theta_max
  std::size_t cells_visited = 0;
};

namespace detail {

inline void check_lcd_params(const LcdParams& p) {
  if (!(p.gamma > 0.0 && p.gamma < 1.0)) throw Error(ErrorKind::InvalidArgument, "gamma must lie in (0,1)");
  if (!(p.alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "alpha must be positive");
  if (!(p.theta_max > 0.0 && p.step > 0.0 && p.depth >= 0))
    throw Error(ErrorKind::InvalidArgument, "theta_max, step and depth must be positive");
}

inline void check_unit(const ComplexVec& a) {
  if (a.size() == 0) throw Error(ErrorKind::InvalidArgument, "empty vector");
  if (!all_finite(a)) throw Error(ErrorKind::InvalidArgument, "vector has non-finite entries");
  const double nrm = a.norm();
  if (nrm == 0.0) throw Error(ErrorKind::InvalidArgument, "degenerate zero vector");
  if (std::abs(nrm - 1.0) > 1e-10) throw Error(ErrorKind::NotUnit, "vector norm is " + std::to_string(nrm));
}

}  // namespace detail

/// Witness slack g(theta) = dist(theta a, lattice) - min(gamma |theta|, alpha);
/// theta is a witness iff g < 0.
inline double lcd_slack(const ComplexVec& a, const Complex& theta, double gamma, double alpha) {
  return lattice_distance(a, theta) - std::min(gamma * std::abs(theta), alpha);
}

/// Branch-and-bound search for the least common denominator of a unit vector.
///
/// Multiplying theta by i permutes the lattice, so only the closed first
/// quadrant is searched. It is tiled by a dyadic quadtree whose finest cells
/// have side `final_step`; cells are expanded in order of their distance to the
/// origin. Since ||a||_2 = 1, g is (1 + gamma)-Lipschitz in theta, so a cell
/// whose center has g >= (1 + gamma) * half-diagonal holds no witness and is
/// dropped. Any nonzero lattice point has norm >= 1, which forces
/// |theta| > 1 / (1 + gamma); cells inside that disc are dropped too.
///
/// The estimate is the smallest modulus of a finest-level center with g < 0.
/// The certified lower bound is the smallest distance to the origin over all
/// finest cells that could not be cleared, floored by 1 / (1 + gamma).
inline LcdResult lcd_search(const ComplexVec& a, const LcdParams& p) {
  detail::check_lcd_params(p);
  detail::check_unit(a);
  const double h = p.final_step();
  const double lipschitz = 1.0 + p.gamma;
  const double floor = 1.0 / (1.0 + p.gamma);

  int levels = 0;
  while (std::ldexp(h, levels) < p.theta_max) ++levels;

  struct Cell {
    double min_mod;
    int level;  // side = h * 2^level
    std::int64_t ix, iy;
  };
  struct Later {
    bool operator()(const Cell& x, const Cell& y) const {
      if (x.min_mod != y.min_mod) return x.min_mod > y.min_mod;
      if (x.level != y.level) return x.level > y.level;
      if (x.ix != y.ix) return x.ix > y.ix;
      return x.iy > y.iy;
    }
  };
  std::priority_queue<Cell, std::vector<Cell>, Later> queue;
  queue.push({0.0, levels, 0, 0});

  LcdResult out;
  double best = std::numeric_limits<double>::infinity();
  double uncertain = std::numeric_limits<double>::infinity();
  Complex best_theta;

  while (!queue.empty()) {
    const Cell c = queue.top();
    queue.pop();
    if (c.min_mod >= best || c.min_mod > p.theta_max) break;
    ++out.cells_visited;
    const double side = std::ldexp(h, c.level);
    const double x0 = static_cast<double>(c.ix) * side;
    const double y0 = static_cast<double>(c.iy) * side;
    if (std::hypot(x0 + side, y0 + side) < floor) continue;
    const Complex center(x0 + 0.5 * side, y0 + 0.5 * side);
    const double g = lcd_slack(a, center, p.gamma, p.alpha);
    if (g >= lipschitz * side * std::numbers::sqrt2 * 0.5) continue;
    if (c.level == 0) {
      uncertain = std::min(uncertain, c.min_mod);
      if (g < 0.0 && std::abs(center) < best) {
        best = std::abs(center);
        best_theta = center;
      }
      continue;
    }
    for (std::int64_t dx = 0; dx < 2; ++dx)
      for (std::int64_t dy = 0; dy < 2; ++dy) {
        const std::int64_t ix = 2 * c.ix + dx, iy = 2 * c.iy + dy;
        const double half = 0.5 * side;
        queue.push({std::hypot(static_cast<double>(ix) * half, static_cast<double>(iy) * half), c.level - 1, ix, iy});
      }
  }

  if (std::isfinite(best)) {
    out.infimum_estimate = best;
    out.theta = best_theta;
    const auto approx = nearest_gaussian_lattice(best_theta * a);
    out.point = approx.point;
    out.achieved_distance = approx.distance;
  } else {
    out.exhausted = true;
    uncertain = std::min(uncertain, p.theta_max);
  }
  out.certified_lower = std::max(floor, std::min(uncertain, best));
  return out;
}

enum class GammaClass { Gamma1, Gamma2, Undetermined };

inline const char* to_string(GammaClass c) {
  switch (c) {
    case GammaClass::Gamma1: return "gamma1";
    case GammaClass::Gamma2: return "gamma2";
    case GammaClass::Undetermined: return "undetermined";
  }
  return "?";
}

struct GammaClassification {
  double eta = 0.0;
  double threshold = 0.0;  // n^0.7 / eta
  GammaClass cls = GammaClass::Undetermined;
  LcdResult lcd;
};

/// Splits by whether the LCD reaches n^0.7 / eta. The search never goes past
/// min(theta_max, threshold), so a vector without a witness below theta_max is
/// undetermined unless the search covered the whole range up to the threshold.
/// With `strict_range`, eta must lie in [2^{-n^0.0001}, n^{-2}).
inline GammaClassification classify_gamma(const ComplexVec& a, double eta, const LcdParams& p,
                                          std::size_t n, bool strict_range = false) {
  if (!(eta > 0.0)) throw Error(ErrorKind::InvalidArgument, "eta must be positive");
  const double nn = static_cast<double>(n);
  if (strict_range && !(eta >= std::exp2(-std::pow(nn, 1e-4)) && eta < 1.0 / (nn * nn)))
    throw Error(ErrorKind::PreconditionViolated, "eta outside [2^{-n^0.0001}, n^-2)");
  GammaClassification out;
  out.eta = eta;
  out.threshold = std::pow(nn, 0.7) / eta;
  LcdParams q = p;
  q.theta_max = std::min(p.theta_max, out.threshold);
  out.lcd = lcd_search(a, q);
  if (out.lcd.theta && std::abs(*out.lcd.theta) < out.threshold)
    out.cls = GammaClass::Gamma2;
  else if (out.lcd.certified_lower >= out.threshold)
    out.cls = GammaClass::Gamma1;
  return out;
}

struct RoundingDecomposition {
  ComplexVec w;
  ComplexVec error;  // theta a - w
  ComplexVec v_sp, v_ss, v_sm;
  std::vector<std::size_t> j1, j2;  // sorted ascending
  double bound_ss = 0.0;  // min(gamma |theta|, alpha) / n^0.2
  double bound_sm = 0.0;  // min(gamma |theta|, alpha) / n^0.4
};

/// ceil(n^e) robust to pow landing a hair above an exact integer.
inline std::size_t ceil_power(std::size_t n, double e) {
  const double x = std::pow(static_cast<double>(n), e);
  const double r = std::round(x);
  return static_cast<std::size_t>(std::abs(x - r) <= 1e-9 * std::max(1.0, r) ? r : std::ceil(x));
}

/// Splits theta a - w into its ceil(n^0.4) largest coordinates (v_sp), the next
/// ceil(n^0.8) - ceil(n^0.4) (v_ss) and the rest (v_sm). Ties in modulus go to
/// the smaller index. The three parts have disjoint supports and are copies of
/// entries of the error vector, so they sum back to it exactly.
inline RoundingDecomposition rounding_decomposition(const ComplexVec& a, const Complex& theta, const ComplexVec& w,
                                                    double gamma, double alpha) {
  if (a.size() != w.size()) throw Error(ErrorKind::DimensionMismatch, "a and w differ in length");
  if (!is_gaussian_integer(w)) throw Error(ErrorKind::InvalidArgument, "w must be a Gaussian-integer vector");
  if (support_size(w) == 0) throw Error(ErrorKind::InvalidArgument, "w must be nonzero");
  const auto n = static_cast<std::size_t>(a.size());
  const double radius = std::min(gamma * std::abs(theta), alpha);

  RoundingDecomposition d;
  d.w = w;
  d.error = theta * a - w;
  if (d.error.norm() > radius) throw Error(ErrorKind::WitnessTooFar, "||theta a - w|| exceeds min(gamma |theta|, alpha)");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(d.error[static_cast<Eigen::Index>(x)]) > std::abs(d.error[static_cast<Eigen::Index>(y)]);
  });
  const std::size_t k1 = std::min(n, ceil_power(n, 0.4));
  const std::size_t k2 = std::min(n, ceil_power(n, 0.8));
  d.v_sp = ComplexVec::Zero(a.size());
  d.v_ss = ComplexVec::Zero(a.size());
  d.v_sm = ComplexVec::Zero(a.size());
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(order[r]);
    if (r < k1) {
      d.v_sp[i] = d.error[i];
      d.j1.push_back(order[r]);
    } else if (r < k2) {
      d.v_ss[i] = d.error[i];
    } else {
      d.v_sm[i] = d.error[i];
    }
    if (r < k2) d.j2.push_back(order[r]);
  }
  std::sort(d.j1.begin(), d.j1.end());
  std::sort(d.j2.begin(), d.j2.end());

  const double nn = static_cast<double>(n);
  d.bound_ss = radius / std::pow(nn, 0.2);
  d.bound_sm = radius / std::pow(nn, 0.4);
  const double slack = 1.0 + 1e-12;
  if (norm(d.v_ss, NormKind::Linf) > d.bound_ss * slack || norm(d.v_sm, NormKind::Linf) > d.bound_sm * slack)
    throw std::logic_error("rounding decomposition violates its sup-norm bounds");
  if ((d.v_sp + d.v_ss + d.v_sm) != d.error) throw std::logic_error("rounding decomposition does not reconstruct");
  return d;
}

}  // namespace rmt
