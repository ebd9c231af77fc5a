#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace isomono {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

/// Tolerances shared across modules.
namespace tol {
inline constexpr double cancel = 1e-9;   // root coincidence / numerator cancellation
inline constexpr double oracle = 1e-10;  // symbolic vs quadrature residues
inline constexpr double sep = 1e-9;      // minimal pole separation
inline constexpr double reg = 1e-8;      // eigenvalue gap for regular leading terms
inline constexpr double rank = 1e-8;     // Gram / chart rank cut, relative
inline constexpr double mono = 1e-8;     // monodromy identities
}  // namespace tol

// Error hierarchy. Every numeric module throws one of these; the CLI maps
// them to exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedInput : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct PreconditionError : Error {
  using Error::Error;
};
struct RegularityError : Error {
  using Error::Error;
};
struct DegenerateError : Error {
  using Error::Error;
};
struct SingularGermError : Error {
  using Error::Error;
};
struct NumericAbort : Error {
  using Error::Error;
};

/// A point of the Riemann sphere: a finite complex number or infinity.
struct Point {
  cplx z{};
  bool infinite = false;

  static Point at(cplx z) { return {z, false}; }
  static Point inf() { return {cplx{}, true}; }

  friend bool operator==(const Point& a, const Point& b) {
    return a.infinite == b.infinite && (a.infinite || a.z == b.z);
  }
};

inline Mat zero_mat(Eigen::Index n) { return Mat::Zero(n, n); }
inline Mat identity(Eigen::Index n) { return Mat::Identity(n, n); }

inline double max_abs(const Mat& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline Mat commutator(const Mat& a, const Mat& b) { return a * b - b * a; }

}  // namespace isomono
