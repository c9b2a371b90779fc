#pragma once

#include "rmt/anticoncentration.hpp"
#include "rmt/core.hpp"
#include "rmt/entry_law.hpp"
#include "rmt/random.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <utility>
#include <vector>

namespace rmt {

// ---------------------------------------------------------------------------
// Primes

namespace detail {

inline std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

inline std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  std::uint64_t result = 1;
  base %= m;
  while (exp) {
    if (exp & 1) result = mul_mod(result, base, m);
    base = mul_mod(base, base, m);
    exp >>= 1;
  }
  return result;
}

}  // namespace detail

/// Deterministic Miller-Rabin; the first twelve prime bases suffice below 2^64.
inline bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  for (std::uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    std::uint64_t x = detail::pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < r; ++i) {
      x = detail::mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

/// Smallest odd prime >= x. By Bertrand's postulate it lies below 2x.
inline std::uint64_t prime_at_least(double x) {
  if (!(x < 9.2e18)) throw Error(ErrorKind::TooLarge, "prime request beyond 64 bits");
  auto p = static_cast<std::uint64_t>(std::ceil(std::max(x, 3.0)));
  if (p % 2 == 0) ++p;
  while (!is_prime(p)) p += 2;
  return p;
}

// ---------------------------------------------------------------------------
// Reduction modulo p

/// Element of (F_p + i F_p)^n as residue pairs in [0, p).
using ReducedVec = std::vector<std::pair<std::uint64_t, std::uint64_t>>;

inline ReducedVec phi_p(const ComplexVec& w, std::uint64_t p) {
  if (p < 3 || p % 2 == 0 || !is_prime(p)) throw Error(ErrorKind::InvalidArgument, "p must be an odd prime");
  if (!is_gaussian_integer(w)) throw Error(ErrorKind::InvalidArgument, "phi_p needs a Gaussian-integer vector");
  const auto mod = [p](double x) {
    const auto q = static_cast<std::int64_t>(p);
    std::int64_t r = static_cast<std::int64_t>(x) % q;
    if (r < 0) r += q;
    return static_cast<std::uint64_t>(r);
  };
  ReducedVec out(static_cast<std::size_t>(w.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) out[static_cast<std::size_t>(i)] = {mod(w[i].real()), mod(w[i].imag())};
  return out;
}

inline std::size_t phi_image_size(const std::vector<ComplexVec>& vectors, std::uint64_t p) {
  std::set<ReducedVec> image;
  for (const auto& w : vectors) image.insert(phi_p(w, p));
  return image.size();
}

// ---------------------------------------------------------------------------
// Level sets

struct LevelSetResult {
  double rho = 0.0;
  int box = 0;  // H: |Re|, |Im| <= H
  std::size_t n = 0;
  std::vector<ComplexVec> vectors;  // includes the zero vector when it qualifies
  std::vector<double> rhos;         // exact rho_{1,z} of each listed vector
  bool zero_included = false;
  std::uint64_t prime = 0;
  std::size_t phi_image_size = 0;
  std::size_t examined = 0;
};

inline constexpr double kLevelSetLimit = 1e8;

/// All w in (Z + iZ)^n with |Re w_j|, |Im w_j| <= H and rho_{1,z}(w) >= rho,
/// by brute force. The image size is taken under phi_p for the given prime
/// (default: smallest odd prime above 2H, which makes phi_p injective).
inline LevelSetResult enumerate_level_set(std::size_t n, int box, const EntryLaw& law, double rho,
                                          std::uint64_t prime = 0, unsigned threads = 0) {
  if (n == 0 || box < 0) throw Error(ErrorKind::InvalidArgument, "need n >= 1 and H >= 0");
  if (!law.is_discrete()) throw Error(ErrorKind::InvalidArgument, "level sets need a discrete law");
  const double side = 2.0 * box + 1.0;
  const double log_cost = 2.0 * static_cast<double>(n) * std::log(side) +
                          static_cast<double>(n) * std::log(static_cast<double>(law.atoms().size()));
  if (log_cost > std::log(kLevelSetLimit)) throw Error(ErrorKind::TooLarge, "level-set enumeration exceeds 1e8");

  LevelSetResult out;
  out.rho = rho;
  out.box = box;
  out.n = n;
  out.prime = prime ? prime : prime_at_least(2.0 * box + 1.0);
  const auto base = static_cast<std::uint64_t>(side);
  std::uint64_t total = 1;
  for (std::size_t k = 0; k < 2 * n; ++k) total *= base;
  out.examined = total;

  std::vector<double> values(total, 0.0);
  auto decode = [&](std::uint64_t code) {
    ComplexVec w(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
      const double re = static_cast<double>(code % base) - box;
      code /= base;
      const double im = static_cast<double>(code % base) - box;
      code /= base;
      w[static_cast<Eigen::Index>(n - 1 - j)] = Complex(re, im);
    }
    return w;
  };
  parallel_for(
      total,
      [&](std::size_t code) {
        ConcentrationQuery q{decode(code), 1.0, law};
        values[code] = rho_exact(q).rho_hat;
      },
      threads);
  for (std::uint64_t code = 0; code < total; ++code) {
    if (values[code] >= rho - 1e-12) {
      out.vectors.push_back(decode(code));
      out.rhos.push_back(values[code]);
      if (support_size(out.vectors.back()) == 0) out.zero_included = true;
    }
  }
  out.phi_image_size = phi_image_size(out.vectors, out.prime);
  return out;
}

// ---------------------------------------------------------------------------
// Counting bound

struct CountingBoundParams {
  double n = 0.0;
  double s = 0.0;
  double k = 0.0;
  double p = 3.0;
  double rho = 0.5;
  double c = 1.0;    // constant of the counting bound
  double c_z = 1.0;  // goodness constant of the law
};

struct CountingHypotheses {
  bool rho_in_unit = false;         // 0 < rho < 1
  bool k_large = false;             // 1000 C_z <= k
  bool k_below_sqrt_s = false;      // k <= sqrt(s)
  bool sqrt_s_below_s = false;      // sqrt(s) <= s
  bool s_below_n_over_log = false;  // s <= n / log n
  bool rho_large = false;           // rho >= C max(e^{-s/k}, s^{-k/4})
  bool p_below_power = false;       // 2^{n/s} >= p
  bool p_above_inverse_rho = false; // p >= C / rho
  bool p_odd_prime = false;

  bool all() const {
    return rho_in_unit && k_large && k_below_sqrt_s && sqrt_s_below_s && s_below_n_over_log && rho_large &&
           p_below_power && p_above_inverse_rho && p_odd_prime;
  }
};

struct CountingBoundResult {
  double log_value = 0.0;   // natural log of the bound
  double log_sparse = 0.0;  // log (5 n p^2 / s)^s
  double log_spread = 0.0;  // log (C rho^{-1} / sqrt(s/k))^n
  CountingHypotheses hypotheses;
};

/// (5 n p^2 / s)^s + (C rho^{-1} / sqrt(s/k))^n evaluated in log space.
/// Hypothesis violations are reported in the flags, never thrown.
inline CountingBoundResult counting_bound(const CountingBoundParams& q) {
  if (!(q.n > 0 && q.s > 0 && q.k > 0 && q.p > 0 && q.rho > 0 && q.c > 0))
    throw Error(ErrorKind::InvalidArgument, "counting bound parameters must be positive");
  CountingBoundResult r;
  r.log_sparse = q.s * (std::log(5.0) + std::log(q.n) + 2.0 * std::log(q.p) - std::log(q.s));
  r.log_spread = q.n * (std::log(q.c) - std::log(q.rho) - 0.5 * (std::log(q.s) - std::log(q.k)));
  const double hi = std::max(r.log_sparse, r.log_spread);
  const double lo = std::min(r.log_sparse, r.log_spread);
  r.log_value = hi + std::log1p(std::exp(lo - hi));

  auto& h = r.hypotheses;
  h.rho_in_unit = q.rho > 0.0 && q.rho < 1.0;
  h.k_large = 1000.0 * q.c_z <= q.k;
  h.k_below_sqrt_s = q.k <= std::sqrt(q.s);
  h.sqrt_s_below_s = std::sqrt(q.s) <= q.s;
  h.s_below_n_over_log = q.n > 1.0 && q.s <= q.n / std::log(q.n);
  // log of C max(e^{-s/k}, s^{-k/4})
  const double log_floor = std::log(q.c) + std::max(-q.s / q.k, -0.25 * q.k * std::log(q.s));
  h.rho_large = std::log(q.rho) >= log_floor;
  h.p_below_power = (q.n / q.s) * std::log(2.0) >= std::log(q.p);
  h.p_above_inverse_rho = std::log(q.p) >= std::log(q.c) - std::log(q.rho);
  h.p_odd_prime = q.p < 9.2e18 && q.p == std::floor(q.p) && static_cast<std::uint64_t>(q.p) % 2 == 1 &&
                  is_prime(static_cast<std::uint64_t>(q.p));
  return r;
}

// ---------------------------------------------------------------------------
// Sparse / non-sparse split and dyadic buckets

struct SparseSplit {
  std::vector<ComplexVec> sparse;     // 0 < |supp| <= n^0.99
  std::vector<ComplexVec> nonsparse;  // |supp| > n^0.99 and inside the box
  std::size_t outside_box = 0;        // non-sparse but some |Re|, |Im| > box
  std::size_t zero_vectors = 0;       // excluded from both parts
};

/// Partitions by support size against n^0.99. `box` bounds the real and
/// imaginary parts admitted to the non-sparse part (eta^{-4} in the analysis).
inline SparseSplit split_sparse(const std::vector<ComplexVec>& vectors, std::size_t n,
                                double box = std::numeric_limits<double>::infinity()) {
  SparseSplit out;
  const double threshold = std::pow(static_cast<double>(n), 0.99);
  for (const auto& w : vectors) {
    const auto supp = static_cast<double>(support_size(w));
    if (supp == 0.0) {
      ++out.zero_vectors;
    } else if (supp <= threshold) {
      out.sparse.push_back(w);
    } else {
      bool inside = true;
      for (Eigen::Index i = 0; i < w.size(); ++i)
        if (std::abs(w[i].real()) > box || std::abs(w[i].imag()) > box) inside = false;
      if (inside)
        out.nonsparse.push_back(w);
      else
        ++out.outside_box;
    }
  }
  return out;
}

struct RhoBucket {
  int j = 0;  // t = 2^{-j}
  double lo = 1.0;
  double hi = 2.0;
  std::vector<std::size_t> members;  // indices into the input
  std::vector<double> rhos;
};

inline constexpr int kMaxBucket = 40;

/// Dyadic bucket index j with rho in [2^{-j}, 2^{1-j}), clamped to [0, 40].
inline int dyadic_bucket(double rho) {
  if (!(rho > 0.0)) return kMaxBucket;
  int exp = 0;
  const double mant = std::frexp(rho, &exp);  // rho = mant * 2^exp, mant in [0.5, 1)
  (void)mant;
  return std::clamp(1 - exp, 0, kMaxBucket);
}

/// Groups vectors by exact rho_{1,z} into W_t = {rho in [t, 2t)}, t = 2^{-j}.
/// Only non-empty buckets are returned, in increasing j.
inline std::vector<RhoBucket> bucket_by_rho(const std::vector<ComplexVec>& vectors, const EntryLaw& law) {
  std::vector<RhoBucket> buckets(kMaxBucket + 1);
  for (int j = 0; j <= kMaxBucket; ++j) {
    buckets[static_cast<std::size_t>(j)].j = j;
    buckets[static_cast<std::size_t>(j)].lo = std::ldexp(1.0, -j);
    buckets[static_cast<std::size_t>(j)].hi = std::ldexp(1.0, 1 - j);
  }
  for (std::size_t idx = 0; idx < vectors.size(); ++idx) {
    const double rho = rho_exact({vectors[idx], 1.0, law}).rho_hat;
    auto& b = buckets[static_cast<std::size_t>(dyadic_bucket(rho))];
    b.members.push_back(idx);
    b.rhos.push_back(rho);
  }
  std::vector<RhoBucket> out;
  for (auto& b : buckets)
    if (!b.members.empty()) out.push_back(std::move(b));
  return out;
}

}  // namespace rmt
