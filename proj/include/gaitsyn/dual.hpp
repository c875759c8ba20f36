#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace gaitsyn {

// Forward-mode scalar with a dynamically sized gradient. An empty gradient
// means "all partials zero"; this keeps constants cheap inside kinematics
// loops. Seed with Dual::seed(value, ndir, k) and read derivatives back from
// .grad after the computation.
struct Dual {
  double val = 0.0;
  Eigen::RowVectorXd grad;  // empty == zero

  Dual() = default;
  Dual(double v) : val(v) {}  // implicit: constants promote silently
  Dual(double v, Eigen::RowVectorXd g) : val(v), grad(std::move(g)) {}

  static Dual seed(double v, int ndir, int dir) {
    Dual d(v);
    d.grad = Eigen::RowVectorXd::Zero(ndir);
    d.grad(dir) = 1.0;
    return d;
  }

  bool constant() const { return grad.size() == 0; }
};

namespace detail {
inline Eigen::RowVectorXd add_grads(const Eigen::RowVectorXd& a, double ca,
                                    const Eigen::RowVectorXd& b, double cb) {
  if (a.size() == 0 && b.size() == 0) return {};
  if (a.size() == 0) return cb * b;
  if (b.size() == 0) return ca * a;
  return ca * a + cb * b;
}
}  // namespace detail

inline Dual operator+(const Dual& a, const Dual& b) {
  return {a.val + b.val, detail::add_grads(a.grad, 1.0, b.grad, 1.0)};
}
inline Dual operator-(const Dual& a, const Dual& b) {
  return {a.val - b.val, detail::add_grads(a.grad, 1.0, b.grad, -1.0)};
}
inline Dual operator-(const Dual& a) {
  return {-a.val, a.grad.size() ? Eigen::RowVectorXd(-a.grad) : Eigen::RowVectorXd()};
}
inline Dual operator*(const Dual& a, const Dual& b) {
  return {a.val * b.val, detail::add_grads(a.grad, b.val, b.grad, a.val)};
}
inline Dual operator/(const Dual& a, const Dual& b) {
  const double inv = 1.0 / b.val;
  return {a.val * inv, detail::add_grads(a.grad, inv, b.grad, -a.val * inv * inv)};
}

inline Dual& operator+=(Dual& a, const Dual& b) { a = a + b; return a; }
inline Dual& operator-=(Dual& a, const Dual& b) { a = a - b; return a; }
inline Dual& operator*=(Dual& a, const Dual& b) { a = a * b; return a; }
inline Dual& operator/=(Dual& a, const Dual& b) { a = a / b; return a; }

inline bool operator<(const Dual& a, const Dual& b) { return a.val < b.val; }
inline bool operator>(const Dual& a, const Dual& b) { return a.val > b.val; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.val <= b.val; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.val >= b.val; }
inline bool operator==(const Dual& a, const Dual& b) { return a.val == b.val; }
inline bool operator!=(const Dual& a, const Dual& b) { return a.val != b.val; }

inline Dual sin(const Dual& a) {
  return {std::sin(a.val), a.grad.size() ? Eigen::RowVectorXd(std::cos(a.val) * a.grad)
                                         : Eigen::RowVectorXd()};
}
inline Dual cos(const Dual& a) {
  return {std::cos(a.val), a.grad.size() ? Eigen::RowVectorXd(-std::sin(a.val) * a.grad)
                                         : Eigen::RowVectorXd()};
}
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.val);
  return {s, a.grad.size() ? Eigen::RowVectorXd(0.5 / s * a.grad) : Eigen::RowVectorXd()};
}
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.val);
  return {e, a.grad.size() ? Eigen::RowVectorXd(e * a.grad) : Eigen::RowVectorXd()};
}
inline Dual atan2(const Dual& y, const Dual& x) {
  const double d = x.val * x.val + y.val * y.val;
  return {std::atan2(y.val, x.val),
          detail::add_grads(y.grad, x.val / d, x.grad, -y.val / d)};
}
inline Dual abs(const Dual& a) { return a.val >= 0.0 ? a : -a; }

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.val; }

}  // namespace gaitsyn

namespace Eigen {
template <>
struct NumTraits<gaitsyn::Dual> : NumTraits<double> {
  using Real = gaitsyn::Dual;
  using NonInteger = gaitsyn::Dual;
  using Nested = gaitsyn::Dual;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 4,
    MulCost = 8,
  };
};
template <typename BinOp>
struct ScalarBinaryOpTraits<gaitsyn::Dual, double, BinOp> {
  using ReturnType = gaitsyn::Dual;
};
template <typename BinOp>
struct ScalarBinaryOpTraits<double, gaitsyn::Dual, BinOp> {
  using ReturnType = gaitsyn::Dual;
};
}  // namespace Eigen
