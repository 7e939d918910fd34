#pragma once

#include <array>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pclnet {

using Complex = std::complex<double>;
using Matrix3c = Eigen::Matrix3cd;

inline constexpr int kPolChannels = 9;

/// 3x3 Hermitian coherency matrix stored as its upper triangle:
/// [T11, T22, T33, Re T12, Im T12, Re T13, Im T13, Re T23, Im T23].
class CoherencyMatrix {
 public:
  CoherencyMatrix() = default;
  explicit CoherencyMatrix(const std::array<double, kPolChannels>& stored)
      : v_(stored) {}

  static CoherencyMatrix identity();
  static CoherencyMatrix diagonal(double t11, double t22, double t33);
  /// Upper triangle of m; the lower triangle is ignored.
  static CoherencyMatrix from_matrix(const Matrix3c& m);

  Matrix3c matrix() const;
  const std::array<double, kPolChannels>& stored() const { return v_; }
  double operator[](std::size_t i) const { return v_[i]; }
  double trace() const { return v_[0] + v_[1] + v_[2]; }

  CoherencyMatrix& operator+=(const CoherencyMatrix& o);
  CoherencyMatrix& operator*=(double s);
  friend CoherencyMatrix operator+(CoherencyMatrix a, const CoherencyMatrix& b) {
    return a += b;
  }
  friend CoherencyMatrix operator*(double s, CoherencyMatrix a) { return a *= s; }
  friend bool operator==(const CoherencyMatrix&, const CoherencyMatrix&) = default;

 private:
  std::array<double, kPolChannels> v_{};
};

struct ValidationReport {
  bool valid = true;
  std::vector<std::string> failures;
};

/// Checks finiteness, nonnegative diagonal, and eigenvalues >= -tol*|trace|.
ValidationReport validate_coherency(const CoherencyMatrix& t, double tol = 1e-9);

/// Real feature vector in the fixed storage order.
std::array<double, kPolChannels> pixel_features(const CoherencyMatrix& t);
CoherencyMatrix from_features(std::span<const double, kPolChannels> f);

/// Loading of eps*trace/3*I applied when the smallest eigenvalue falls below
/// 1e-9*trace, so that the matrix can be inverted.
inline constexpr double kSingularGuardEps = 1e-6;
Matrix3c guard_singular(const Matrix3c& m);

/// Guarded matrix with its inverse, computed once per sample.
struct PreparedCoherency {
  Matrix3c m;
  Matrix3c inv;
};
PreparedCoherency prepare(const CoherencyMatrix& t);

}  // namespace pclnet
