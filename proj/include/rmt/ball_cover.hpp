#pragma once

#include "rmt/core.hpp"

#include <cmath>
#include <numbers>
#include <cstdint>
#include <limits>
#include <map>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rmt {

struct WeightedPoint {
  Complex z;
  double weight = 0.0;
};

struct BallCover {
  double mass = 0.0;
  Complex center{0.0, 0.0};
  std::size_t candidates = 0;  // centers examined
};

namespace detail {

/// Merges points whose coordinates agree after quantizing at `resolution`.
/// The output is ordered by quantized key, hence deterministic.
inline std::vector<WeightedPoint> merge_points(const std::vector<WeightedPoint>& pts,
                                               double resolution) {
  std::map<std::pair<std::int64_t, std::int64_t>, WeightedPoint> bins;
  for (const auto& p : pts) {
    const std::pair<std::int64_t, std::int64_t> key{std::llround(p.z.real() / resolution),
                                                    std::llround(p.z.imag() / resolution)};
    auto [it, inserted] = bins.try_emplace(key, p);
    if (!inserted) it->second.weight += p.weight;
  }
  std::vector<WeightedPoint> out;
  out.reserve(bins.size());
  for (auto& [key, p] : bins) out.push_back(p);
  return out;
}

inline double merge_resolution(const std::vector<WeightedPoint>& pts) {
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max(scale, std::abs(p.z));
  return 1e-11 * std::max(scale, 1.0);
}

}  // namespace detail

/// Largest total weight inside a closed disc of radius r over a finite
/// weighted planar point set.
///
/// Some optimal disc has a point on its boundary (translate any optimal disc
/// until one does), so with `pair_centers` every point is put on the boundary
/// in turn and an angular sweep finds the best center on the circle of radius
/// r around it. With `pair_centers == false` only the points themselves are
/// tried (a lower bound). A uniform grid of cell size 2r limits neighbours to a
/// 3x3 block of cells, and blocks whose total weight cannot beat the incumbent
/// are skipped.
inline BallCover max_ball_mass(const std::vector<WeightedPoint>& points, double r,
                               bool pair_centers = true) {
  BallCover best;
  if (points.empty()) return best;
  const double tol = 1e-9 * std::max(r, 1.0);
  const double reach = r + tol;
  const double cell = std::max(2.0 * r, 1e-12);

  using Key = std::pair<std::int64_t, std::int64_t>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return std::hash<std::int64_t>()(k.first * 0x9e3779b97f4a7c15LL ^ k.second);
    }
  };
  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> grid;
  std::unordered_map<Key, double, KeyHash> cell_mass;
  std::vector<Key> keys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    keys[i] = {static_cast<std::int64_t>(std::floor(points[i].z.real() / cell)),
               static_cast<std::int64_t>(std::floor(points[i].z.imag() / cell))};
    grid[keys[i]].push_back(i);
    cell_mass[keys[i]] += points[i].weight;
  }
  auto block_mass = [&](const Key& k) {
    double m = 0.0;
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        if (auto it = cell_mass.find({k.first + dx, k.second + dy}); it != cell_mass.end())
          m += it->second;
    return m;
  };
  auto mass_at = [&](const Complex& c) {
    const Key k{static_cast<std::int64_t>(std::floor(c.real() / cell)),
                static_cast<std::int64_t>(std::floor(c.imag() / cell))};
    double m = 0.0;
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = grid.find({k.first + dx, k.second + dy});
        if (it == grid.end()) continue;
        for (std::size_t j : it->second)
          if (std::abs(points[j].z - c) <= reach) m += points[j].weight;
      }
    return m;
  };
  auto consider = [&](const Complex& c) {
    ++best.candidates;
    const double m = mass_at(c);
    if (m > best.mass) {
      best.mass = m;
      best.center = c;
    }
  };

  for (std::size_t i = 0; i < points.size(); ++i) {
    if (block_mass(keys[i]) <= best.mass) continue;
    consider(points[i].z);
  }
  if (!pair_centers || r <= 0.0) return best;

  // Angular sweep: with point i on the boundary, the centers z_i + r e^{it}
  // covering point j form the closed arc |t - arg(z_j - z_i)| <= acos(d / 2r).
  struct Event {
    double angle;
    double delta;
  };
  std::vector<Event> events;
  const double two_pi = 2.0 * std::numbers::pi;
  const double angle_tol = 1e-10;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Key& k = keys[i];
    if (block_mass(k) <= best.mass) continue;
    events.clear();
    double initial = points[i].weight;
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = grid.find({k.first + dx, k.second + dy});
        if (it == grid.end()) continue;
        for (std::size_t j : it->second) {
          if (j == i) continue;
          const Complex diff = points[j].z - points[i].z;
          const double d = std::abs(diff);
          if (d > 2.0 * r + tol) continue;
          if (d == 0.0) {
            initial += points[j].weight;
            continue;
          }
          const double half = std::acos(std::min(1.0, d / (2.0 * r))) + angle_tol;
          double lo = std::arg(diff) - half;
          lo -= two_pi * std::floor(lo / two_pi);
          const double hi = lo + 2.0 * half;
          events.push_back({lo, points[j].weight});
          if (hi >= two_pi) {
            initial += points[j].weight;  // arc covers angle 0
            events.push_back({hi - two_pi, -points[j].weight});
          } else {
            events.push_back({hi, -points[j].weight});
          }
        }
      }
    double total = initial;
    for (const auto& e : events)
      if (e.delta > 0.0) total += e.delta;
    if (total <= best.mass) continue;
    // openings before closings at equal angles: the arcs are closed
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
      return a.angle != b.angle ? a.angle < b.angle : a.delta > b.delta;
    });
    double cur = initial, top = initial, top_angle = 0.0;
    for (const auto& e : events) {
      cur += e.delta;
      if (cur > top) {
        top = cur;
        top_angle = e.angle;
      }
    }
    if (top <= best.mass) continue;
    consider(points[i].z + std::polar(r, top_angle));
  }
  return best;
}

}  // namespace rmt
