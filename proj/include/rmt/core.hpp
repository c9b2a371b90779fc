#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmt {

using Complex = std::complex<double>;
using ComplexVec = Eigen::VectorXcd;
using ComplexMat = Eigen::MatrixXcd;

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  InvalidLaw,
  NoFiniteC,
  TooLargeForExact,
  DegenerateDenominator,
  PreconditionViolated,
  NotUnit,
  WitnessTooFar,
  DimensionTooLarge,
  IndexOutOfRange,
  TooLarge,
  BackendFailure,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidLaw: return "InvalidLaw";
    case ErrorKind::NoFiniteC: return "NoFiniteC";
    case ErrorKind::TooLargeForExact: return "TooLargeForExact";
    case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::NotUnit: return "NotUnit";
    case ErrorKind::WitnessTooFar: return "WitnessTooFar";
    case ErrorKind::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::BackendFailure: return "BackendFailure";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline bool all_finite(const ComplexVec& v) {
  return std::all_of(v.data(), v.data() + v.size(), [](const Complex& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

inline bool all_finite(const ComplexMat& a) {
  return std::all_of(a.data(), a.data() + a.size(), [](const Complex& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

enum class NormKind { L1, L2, Linf };

inline double norm(const ComplexVec& v, NormKind p) {
  switch (p) {
    case NormKind::L1: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < v.size(); ++i) s += std::abs(v[i]);
      return s;
    }
    case NormKind::L2:
      // clamp keeps the ordering with the other norms exact under roundoff
      return std::clamp(v.norm(), norm(v, NormKind::Linf), norm(v, NormKind::L1));
    case NormKind::Linf: {
      double m = 0.0;
      for (Eigen::Index i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v[i]));
      return m;
    }
  }
  return 0.0;
}

/// Round half away from zero (std::round semantics), applied to each part.
inline Complex round_gaussian(const Complex& z) {
  return {std::round(z.real()), std::round(z.imag())};
}

struct LatticeApprox {
  ComplexVec point;  // Gaussian-integer vector
  double distance = 0.0;
};

/// Nearest point of (Z + iZ)^n in l2; separable, so componentwise rounding.
inline LatticeApprox nearest_gaussian_lattice(const ComplexVec& x) {
  LatticeApprox out{ComplexVec(x.size()), 0.0};
  double sq = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out.point[i] = round_gaussian(x[i]);
    sq += std::norm(x[i] - out.point[i]);
  }
  out.distance = std::sqrt(sq);
  return out;
}

/// Same distance as nearest_gaussian_lattice(theta * a) without allocating.
inline double lattice_distance(const ComplexVec& a, const Complex& theta) {
  double sq = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Complex y = theta * a[i];
    const double dr = y.real() - std::round(y.real());
    const double di = y.imag() - std::round(y.imag());
    sq += dr * dr + di * di;
  }
  return std::sqrt(sq);
}

inline bool is_gaussian_integer(const ComplexVec& w) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i].real() != std::round(w[i].real()) || w[i].imag() != std::round(w[i].imag()))
      return false;
  }
  return true;
}

inline std::size_t support_size(const ComplexVec& v) {
  std::size_t s = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] != Complex(0.0, 0.0)) ++s;
  return s;
}

}  // namespace rmt
