#pragma once

#include "rmt/core.hpp"
#include "rmt/entry_law.hpp"
#include "rmt/random.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace rmt {

struct EnsembleSample {
  ComplexMat shift;      // M
  ComplexMat noise;      // N_n
  ComplexMat composite;  // M + N_n
};

/// Fills the noise row-major from the stream. In strict mode a shift with
/// operator norm above n^0.51 is rejected.
inline EnsembleSample sample_ensemble(std::size_t n, const ComplexMat& shift, const EntryLaw& law,
                                      RandomStream& stream, bool strict = false) {
  const auto nn = static_cast<Eigen::Index>(n);
  if (shift.rows() != nn || shift.cols() != nn)
    throw Error(ErrorKind::DimensionMismatch, "shift must be n x n");
  if (strict) {
    Eigen::BDCSVD<ComplexMat> svd(shift);
    const double top = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    if (top > std::pow(static_cast<double>(n), 0.51) * (1.0 + 1e-12))
      throw Error(ErrorKind::PreconditionViolated, "shift operator norm exceeds n^0.51");
  }
  EnsembleSample s{shift, ComplexMat(nn, nn), ComplexMat(nn, nn)};
  for (Eigen::Index i = 0; i < nn; ++i)
    for (Eigen::Index j = 0; j < nn; ++j) s.noise(i, j) = law.sample(stream);
  s.composite = s.shift + s.noise;
  return s;
}

struct SpectralSummary {
  std::vector<double> singular_values;  // nonincreasing
  std::vector<Complex> eigenvalues;
  double residual = 0.0;  // relative |sum s_i^2 - ||A||_F^2|

  double smallest_singular_value() const {
    return singular_values.empty() ? 0.0 : singular_values.back();
  }
};

inline std::vector<double> singular_values(const ComplexMat& a) {
  if (!all_finite(a)) throw Error(ErrorKind::InvalidArgument, "matrix has non-finite entries");
  Eigen::BDCSVD<ComplexMat> svd(a);
  const auto& s = svd.singularValues();
  std::vector<double> out(s.data(), s.data() + s.size());
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

inline double least_singular_value(const ComplexMat& a) {
  const auto s = singular_values(a);
  return s.empty() ? 0.0 : s.back();
}

inline std::vector<Complex> eigenvalues(const ComplexMat& a) {
  if (a.rows() != a.cols()) throw Error(ErrorKind::DimensionMismatch, "eigenvalues need a square matrix");
  if (!all_finite(a)) throw Error(ErrorKind::InvalidArgument, "matrix has non-finite entries");
  Eigen::ComplexEigenSolver<ComplexMat> solver(a, false);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::BackendFailure, "eigensolver did not converge");
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

inline SpectralSummary spectral(const ComplexMat& a) {
  if (a.rows() != a.cols()) throw Error(ErrorKind::DimensionMismatch, "spectral needs a square matrix");
  SpectralSummary out;
  out.singular_values = singular_values(a);
  out.eigenvalues = eigenvalues(a);
  double ss = 0.0;
  for (double s : out.singular_values) ss += s * s;
  const double fro = a.squaredNorm();
  out.residual = fro > 0.0 ? std::abs(ss - fro) / fro : ss;
  if (!(out.residual < 1e-8))
    throw Error(ErrorKind::BackendFailure, "SVD residual " + std::to_string(out.residual));
  return out;
}

/// Largest singular value by power iteration on A^H A from a seeded start.
inline double op_norm_2(const ComplexMat& a, double tol = 1e-10, std::size_t max_iter = 10000,
                        std::uint64_t seed = 0x5eed) {
  if (!all_finite(a)) throw Error(ErrorKind::InvalidArgument, "matrix has non-finite entries");
  if (a.size() == 0) return 0.0;
  RandomStream stream(seed, 0);
  ComplexVec x(a.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = Complex(stream.normal(), stream.normal());
  x.normalize();
  double prev = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    ComplexVec y = a.adjoint() * (a * x);
    const double lambda = y.norm();  // converges to sigma_max^2
    if (lambda == 0.0) return 0.0;
    x = y / lambda;
    if (it > 0 && std::abs(lambda - prev) <= tol * lambda) return std::sqrt(lambda);
    prev = lambda;
  }
  throw Error(ErrorKind::BackendFailure, "power iteration did not converge");
}

struct SignNorm {
  double value = 0.0;
  std::vector<int> witness;  // entries +-1, first entry +1

  /// Complex infinity-to-two norm lies in [value, 2 value].
  double complex_upper() const { return 2.0 * value; }
};

inline constexpr std::size_t kMaxExhaustiveColumns = 20;

/// max over v in {+-1}^m of ||B v||_2, by Gray-code enumeration with one
/// column update per step. v and -v give the same norm, so v_0 = +1 is fixed.
inline SignNorm inf_to_2_sign_norm(const ComplexMat& b) {
  const auto m = static_cast<std::size_t>(b.cols());
  if (m > kMaxExhaustiveColumns)
    throw Error(ErrorKind::DimensionTooLarge, "exhaustive sign norm limited to 20 columns");
  SignNorm out;
  if (m == 0 || b.rows() == 0) {
    out.witness.assign(m, 1);
    return out;
  }
  std::vector<int> v(m, 1);
  ComplexVec y = b.rowwise().sum();
  double best = y.squaredNorm();
  out.witness = v;
  const std::uint64_t steps = std::uint64_t{1} << (m - 1);
  for (std::uint64_t k = 1; k < steps; ++k) {
    const auto bit = static_cast<std::size_t>(std::countr_zero(k)) + 1;  // never flips column 0
    y -= (2.0 * v[bit]) * b.col(static_cast<Eigen::Index>(bit));
    v[bit] = -v[bit];
    // Refresh periodically so rounding drift cannot accumulate over 2^19 updates.
    if ((k & 0xFFF) == 0) {
      Eigen::VectorXd vd(static_cast<Eigen::Index>(m));
      for (std::size_t j = 0; j < m; ++j) vd[static_cast<Eigen::Index>(j)] = v[j];
      y = b * vd.cast<Complex>();
    }
    const double val = y.squaredNorm();
    if (val > best) {
      best = val;
      out.witness = v;
    }
  }
  out.value = std::sqrt(best);
  return out;
}

/// sqrt(sum_i ||row_i||_1^2); an upper bound on the complex infinity-to-two norm.
inline double inf_to_2_upper(const ComplexMat& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < b.cols(); ++j) row += std::abs(b(i, j));
    s += row * row;
  }
  return std::sqrt(s);
}

struct ProjectionSelection {
  std::vector<std::size_t> indices;  // sorted, unique
  double epsilon = 0.0;
  double l2_threshold = 0.0;   // n^{2 eps} m
  double sum_threshold = 0.0;  // n^{eps} sqrt(m)
  std::size_t dimension = 0;

  std::size_t excluded() const { return dimension - indices.size(); }
};

/// Rows i with sum_j |a_ij|^2 <= n^{2 eps} m and |sum_j a_ij| <= n^eps sqrt(m).
inline ProjectionSelection select_good_rows(const ComplexMat& a, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5))
    throw Error(ErrorKind::InvalidArgument, "epsilon must lie in (0, 1/2)");
  const double n = static_cast<double>(a.rows());
  const double m = static_cast<double>(a.cols());
  ProjectionSelection sel;
  sel.epsilon = epsilon;
  sel.dimension = static_cast<std::size_t>(a.rows());
  sel.l2_threshold = std::pow(n, 2.0 * epsilon) * m;
  sel.sum_threshold = std::pow(n, epsilon) * std::sqrt(m);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double l2 = a.row(i).squaredNorm();
    const double sum = std::abs(a.row(i).sum());
    if (l2 <= sel.l2_threshold && sum <= sel.sum_threshold) sel.indices.push_back(static_cast<std::size_t>(i));
  }
  return sel;
}

inline ProjectionSelection selection_from_indices(std::vector<std::size_t> indices, std::size_t dimension) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  ProjectionSelection sel;
  sel.indices = std::move(indices);
  sel.dimension = dimension;
  return sel;
}

/// Zeroes every row outside the selection (P_I A).
inline ComplexMat project_rows(const ComplexMat& a, const ProjectionSelection& sel) {
  ComplexMat out = ComplexMat::Zero(a.rows(), a.cols());
  for (std::size_t i : sel.indices) {
    if (i >= static_cast<std::size_t>(a.rows())) throw Error(ErrorKind::IndexOutOfRange, "row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

/// Zeroes every column outside the selection (A P_J).
inline ComplexMat project_cols(const ComplexMat& a, const ProjectionSelection& sel) {
  ComplexMat out = ComplexMat::Zero(a.rows(), a.cols());
  for (std::size_t j : sel.indices) {
    if (j >= static_cast<std::size_t>(a.cols())) throw Error(ErrorKind::IndexOutOfRange, "column index out of range");
    out.col(static_cast<Eigen::Index>(j)) = a.col(static_cast<Eigen::Index>(j));
  }
  return out;
}

/// Keeps only the selected columns (A P_J viewed as n x |J|).
inline ComplexMat restrict_cols(const ComplexMat& a, const ProjectionSelection& sel) {
  ComplexMat out(a.rows(), static_cast<Eigen::Index>(sel.indices.size()));
  for (std::size_t k = 0; k < sel.indices.size(); ++k) {
    if (sel.indices[k] >= static_cast<std::size_t>(a.cols()))
      throw Error(ErrorKind::IndexOutOfRange, "column index out of range");
    out.col(static_cast<Eigen::Index>(k)) = a.col(static_cast<Eigen::Index>(sel.indices[k]));
  }
  return out;
}

/// out(i, j) = b(i, pi_i(j)) with independent uniform pi_i per row.
inline ComplexMat permute_rows_independently(const ComplexMat& b, RandomStream& stream) {
  ComplexMat out(b.rows(), b.cols());
  const auto m = static_cast<std::size_t>(b.cols());
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    const auto perm = stream.permutation(m);
    for (std::size_t j = 0; j < m; ++j)
      out(i, static_cast<Eigen::Index>(j)) = b(i, static_cast<Eigen::Index>(perm[j]));
  }
  return out;
}

/// f(pi) = sum_j v_{pi(j)} y_j for a sign vector v.
inline Complex permutation_statistic(const std::vector<int>& v, const ComplexVec& y,
                                     const std::vector<std::size_t>& perm) {
  if (v.size() != static_cast<std::size_t>(y.size()) || perm.size() != v.size())
    throw Error(ErrorKind::DimensionMismatch, "v, y and the permutation differ in length");
  Complex s{0.0, 0.0};
  for (std::size_t j = 0; j < v.size(); ++j) s += static_cast<double>(v[perm[j]]) * y[static_cast<Eigen::Index>(j)];
  return s;
}

/// E f(pi) = ((2l - m) / m) sum_j y_j, l the number of +1 entries of v.
inline Complex permutation_statistic_mean(const std::vector<int>& v, const ComplexVec& y) {
  if (v.size() != static_cast<std::size_t>(y.size()) || v.empty())
    throw Error(ErrorKind::DimensionMismatch, "v and y differ in length");
  const auto ones = static_cast<double>(std::count(v.begin(), v.end(), 1));
  const auto m = static_cast<double>(v.size());
  return ((2.0 * ones - m) / m) * y.sum();
}

/// Uniform random subset of [n] of the given size, sorted.
inline std::vector<std::size_t> random_subset(std::size_t n, std::size_t size, RandomStream& stream) {
  auto perm = stream.permutation(n);
  perm.resize(std::min(size, n));
  std::sort(perm.begin(), perm.end());
  return perm;
}

}  // namespace rmt
