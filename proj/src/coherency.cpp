#include "pclnet/coherency.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "pclnet/error.hpp"

namespace pclnet {

CoherencyMatrix CoherencyMatrix::identity() { return diagonal(1, 1, 1); }

CoherencyMatrix CoherencyMatrix::diagonal(double t11, double t22, double t33) {
  return CoherencyMatrix({t11, t22, t33, 0, 0, 0, 0, 0, 0});
}

CoherencyMatrix CoherencyMatrix::from_matrix(const Matrix3c& m) {
  return CoherencyMatrix({m(0, 0).real(), m(1, 1).real(), m(2, 2).real(),
                          m(0, 1).real(), m(0, 1).imag(), m(0, 2).real(),
                          m(0, 2).imag(), m(1, 2).real(), m(1, 2).imag()});
}

Matrix3c CoherencyMatrix::matrix() const {
  Matrix3c m;
  const Complex t12(v_[3], v_[4]), t13(v_[5], v_[6]), t23(v_[7], v_[8]);
  m << v_[0], t12, t13,
       std::conj(t12), v_[1], t23,
       std::conj(t13), std::conj(t23), v_[2];
  return m;
}

CoherencyMatrix& CoherencyMatrix::operator+=(const CoherencyMatrix& o) {
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}

CoherencyMatrix& CoherencyMatrix::operator*=(double s) {
  for (double& x : v_) x *= s;
  return *this;
}

ValidationReport validate_coherency(const CoherencyMatrix& t, double tol) {
  ValidationReport report;
  auto flag = [&](std::string what) {
    report.valid = false;
    report.failures.push_back(std::move(what));
  };
  for (double x : t.stored()) {
    if (!std::isfinite(x)) {
      flag("non-finite entry");
      return report;
    }
  }
  if (t[0] < 0 || t[1] < 0 || t[2] < 0) flag("negative diagonal");
  Eigen::SelfAdjointEigenSolver<Matrix3c> eig(t.matrix(), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -tol * std::abs(t.trace())) flag("not PSD");
  return report;
}

std::array<double, kPolChannels> pixel_features(const CoherencyMatrix& t) {
  return t.stored();
}

CoherencyMatrix from_features(std::span<const double, kPolChannels> f) {
  std::array<double, kPolChannels> v;
  std::copy(f.begin(), f.end(), v.begin());
  return CoherencyMatrix(v);
}

Matrix3c guard_singular(const Matrix3c& m) {
  const double trace = m.trace().real();
  Eigen::SelfAdjointEigenSolver<Matrix3c> eig(m, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() >= 1e-9 * trace) return m;
  return m + Matrix3c::Identity() * (kSingularGuardEps * trace / 3.0);
}

PreparedCoherency prepare(const CoherencyMatrix& t) {
  PreparedCoherency p;
  p.m = guard_singular(t.matrix());
  Eigen::FullPivLU<Matrix3c> lu(p.m);
  if (!lu.isInvertible()) fail(ErrorKind::numeric, "coherency matrix is singular");
  p.inv = lu.inverse();
  return p;
}

}  // namespace pclnet
