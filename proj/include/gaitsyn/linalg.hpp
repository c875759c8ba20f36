#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "gaitsyn/dual.hpp"

namespace gaitsyn {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

template <typename S>
using VecS = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatS = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec2S = Eigen::Matrix<S, 2, 1>;

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense LU with partial pivoting, templated so Dual flows through the solve.
// Pivot selection compares value parts only. Sized for the small KKT systems
// that show up here (<= ~25 unknowns).
template <typename S>
VecS<S> lu_solve(MatS<S> A, VecS<S> b) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || b.size() != n) throw std::invalid_argument("lu_solve: shape mismatch");
  std::vector<int> piv(n);
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::abs(value_of(A(k, k)));
    for (int i = k + 1; i < n; ++i) {
      const double m = std::abs(value_of(A(i, k)));
      if (m > best) { best = m; p = i; }
    }
    if (best < 1e-14) throw SingularMatrixError("lu_solve: singular pivot");
    piv[k] = p;
    if (p != k) { A.row(p).swap(A.row(k)); std::swap(b(p), b(k)); }
    const S inv_piv = S(1.0) / A(k, k);
    for (int i = k + 1; i < n; ++i) {
      const S f = A(i, k) * inv_piv;
      if (value_of(f) == 0.0 && (!std::is_same<S, Dual>::value)) continue;
      A(i, k) = f;
      for (int j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
      b(i) -= f * b(k);
    }
  }
  VecS<S> x(n);
  for (int i = n - 1; i >= 0; --i) {
    S s = b(i);
    for (int j = i + 1; j < n; ++j) s -= A(i, j) * x(j);
    x(i) = s / A(i, i);
  }
  return x;
}

// Extract values / gradients of a Dual vector computed with ndir directions.
inline VecX values_of(const VecS<Dual>& v) {
  VecX out(v.size());
  for (int i = 0; i < v.size(); ++i) out(i) = v(i).val;
  return out;
}

inline MatX grads_of(const VecS<Dual>& v, int ndir) {
  MatX out = MatX::Zero(v.size(), ndir);
  for (int i = 0; i < v.size(); ++i)
    if (v(i).grad.size()) out.row(i) = v(i).grad;
  return out;
}

}  // namespace gaitsyn
