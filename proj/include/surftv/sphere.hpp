#pragma once

// Differential geometry on the unit sphere S^2 embedded in R^3.
//
// Points are unit Vec3; tangent vectors at a base point m are Vec3
// orthogonal to m. Tangent vectors are measured in radians (|log_a(b)| is
// the arc length from a to b).

#include "surftv/core.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <vector>

namespace surftv::sphere {

/// Pairs closer than this to antipodal are rejected by log and transport.
inline constexpr double kAntipodalAngle = kPi - 1e-8;

/// Great-arc distance in [0, pi].
///
/// Evaluated as atan2(|a x b|, a.b), which equals arccos of the clamped dot
/// product but keeps full precision near 0 and pi.
inline double distance(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(a.dot(b), -1.0, 1.0);
  return std::atan2(a.cross(b).norm(), c);
}

inline Vec3 project_tangent(const Vec3& base, const Vec3& v) {
  return v - base.dot(v) * base;
}

namespace detail {

// theta / sin(theta), stable at theta -> 0.
inline double theta_over_sin(double theta, double sinTheta) {
  if (theta < 1e-4) return 1.0 + theta * theta / 6.0;
  return theta / sinTheta;
}

// sin(n) / n
inline double sinc(double n) {
  if (n < 1e-4) return 1.0 - n * n / 6.0;
  return std::sin(n) / n;
}

// (n cos n - sin n) / n^3, the derivative of sinc divided by n.
inline double sinc_prime_over_n(double n) {
  if (n < 1e-3) return -1.0 / 3.0 + n * n / 30.0;
  return (n * std::cos(n) - std::sin(n)) / (n * n * n);
}

[[noreturn]] inline void throw_antipodal(const char* what, const Vec3& a,
                                         const Vec3& b) {
  std::ostringstream os;
  os << what << ": antipodal points (" << a.transpose() << ") and ("
     << b.transpose() << ")";
  throw AntipodalError(os.str());
}

}  // namespace detail

/// Logarithmic map log_base(target), tangent at base with norm equal to
/// distance(base, target). Throws AntipodalError when the angle exceeds
/// kAntipodalAngle.
inline Vec3 log(const Vec3& base, const Vec3& target) {
  const double c = std::clamp(base.dot(target), -1.0, 1.0);
  const Vec3 v = target - c * base;
  const double sinTheta = base.cross(target).norm();
  const double theta = std::atan2(sinTheta, c);
  if (theta > kAntipodalAngle) detail::throw_antipodal("sphere::log", base, target);
  const double nv = v.norm();
  if (nv == 0.0) return Vec3::Zero();
  return (theta / nv) * v;
}

/// Exponential map: follows the geodesic from base in direction x for unit
/// time. x is assumed tangent at base.
inline Vec3 exp(const Vec3& base, const Vec3& x) {
  const double n = x.norm();
  if (n == 0.0) return base;
  return std::cos(n) * base + (std::sin(n) / n) * x;
}

/// Exponential map followed by renormalization; used when the result is
/// stored as a new base point.
inline Vec3 exp_normalized(const Vec3& base, const Vec3& x) {
  return exp(base, x).normalized();
}

/// Parallel transport of x (tangent at from) to the tangent space at to,
/// along the shortest geodesic.
///
/// Uses the rotation form P(x) = x - (to.x) / (1 + from.to) (from + to),
/// which is algebraically the two-point formula
/// x - <log_from(to), x> / d^2 (log_from(to) + log_to(from)) but has no
/// division by d.
inline Vec3 transport(const Vec3& from, const Vec3& to, const Vec3& x) {
  const double c = from.dot(to);
  if (distance(from, to) > kAntipodalAngle)
    detail::throw_antipodal("sphere::transport", from, to);
  return x - (to.dot(x) / (1.0 + c)) * (from + to);
}

/// The rotation about from x to taking `from` to `to`. Its restriction to
/// the tangent plane at `from` is parallel transport, and it commutes with
/// the exponential map: exp_to(P x) = R exp_from(x).
inline Eigen::Matrix3d rotation_between(const Vec3& from, const Vec3& to) {
  const double c = from.dot(to);
  if (distance(from, to) > kAntipodalAngle)
    detail::throw_antipodal("sphere::rotation_between", from, to);
  const Vec3 v = from.cross(to);
  Eigen::Matrix3d vx;
  vx << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return Eigen::Matrix3d::Identity() + vx + (vx * vx) / (1.0 + c);
}

// Adjoint derivatives of the maps above, expressed through ambient
// extensions. Callers project the returned ambient gradients onto the
// relevant tangent plane.
namespace diff {

/// (d exp_m(z) / dz)^T w for the ambient extension
/// exp(m, z) = cos|z| m + sinc|z| z.
inline Vec3 exp_adjoint_z(const Vec3& m, const Vec3& z, const Vec3& w) {
  const double n = z.norm();
  const double s = detail::sinc(n);
  const double sp = detail::sinc_prime_over_n(n);
  return s * w + (sp * z.dot(w) - s * m.dot(w)) * z;
}

/// Gradients of q . log_a(b) with respect to a and b (ambient).
struct LogAdjoint {
  Vec3 wrtBase;
  Vec3 wrtTarget;
};

inline LogAdjoint log_adjoint(const Vec3& a, const Vec3& b, const Vec3& q) {
  const double c = std::clamp(a.dot(b), -1.0, 1.0);
  const double sinTheta = a.cross(b).norm();
  const double theta = std::atan2(sinTheta, c);
  if (theta > kAntipodalAngle) detail::throw_antipodal("sphere::log_adjoint", a, b);
  const double k = detail::theta_over_sin(theta, sinTheta);
  // dk/dc
  const double kp = theta < 1e-3
                        ? -1.0 / 3.0 - 2.0 * theta * theta / 15.0
                        : (c * k - 1.0) / (sinTheta * sinTheta);
  const Vec3 v = b - c * a;
  const double qv = q.dot(v);
  const double qa = q.dot(a);
  LogAdjoint out;
  out.wrtTarget = kp * qv * a + k * q - k * qa * a;
  out.wrtBase = kp * qv * b - k * qa * b - k * c * q;
  return out;
}

/// Gradient with respect to `to` of w . transport(from, to, x).
inline Vec3 transport_adjoint_to(const Vec3& from, const Vec3& to,
                                 const Vec3& x, const Vec3& w) {
  const double onePlusC = 1.0 + from.dot(to);
  const double bx = to.dot(x);
  const double beta = bx / onePlusC;
  const double wab = w.dot(from + to);
  const Vec3 gradBeta = x / onePlusC - (bx / (onePlusC * onePlusC)) * from;
  return -wab * gradBeta - beta * w;
}

/// Gradient with respect to `to` of <R(from, to), M>_F, the Frobenius
/// pairing of rotation_between(from, to) with a fixed 3x3 matrix.
inline Vec3 rotation_pairing_gradient(const Vec3& from, const Vec3& to,
                                      const Eigen::Matrix3d& M) {
  const double onePlusC = 1.0 + from.dot(to);
  const Vec3 v = from.cross(to);
  const double tr = M.trace();
  const Vec3 axial(M(2, 1) - M(1, 2), M(0, 2) - M(2, 0), M(1, 0) - M(0, 1));
  const Vec3 sym = (M + M.transpose()) * v;
  const double quad = v.dot(M * v) - tr * v.squaredNorm();
  return axial.cross(from) + (sym - 2.0 * tr * v).cross(from) / onePlusC -
         (quad / (onePlusC * onePlusC)) * from;
}

}  // namespace diff

/// Weighted Karcher objective 1/2 sum_l w_l d(m, g_l)^2.
inline double karcher_objective(std::span<const double> weights,
                                std::span<const Vec3> points, const Vec3& m) {
  double f = 0.0;
  for (std::size_t l = 0; l < points.size(); ++l) {
    if (weights[l] == 0.0) continue;
    const double d = distance(m, points[l]);
    f += weights[l] * d * d;
  }
  return 0.5 * f;
}

/// sum_l w_l log_m(g_l); zero exactly at a Riemannian center of mass.
/// Labels with zero weight are skipped, so they may be antipodal to m.
inline Vec3 karcher_residual(std::span<const double> weights,
                             std::span<const Vec3> points, const Vec3& m) {
  Vec3 r = Vec3::Zero();
  for (std::size_t l = 0; l < points.size(); ++l) {
    if (weights[l] == 0.0) continue;
    r += weights[l] * log(m, points[l]);
  }
  return r;
}

inline constexpr double kMaxKarcherStep = 1e4;

struct KarcherOptions {
  double tol = 1e-10;
  int maxIters = 200;
  ArmijoParams armijo{};
};

/// Weighted Riemannian center of mass by gradient descent with Armijo
/// backtracking: m <- exp_m(eta * sum_l w_l log_m(g_l)), with the weights
/// scaled to sum to one. The first search starts at eta = 1, later ones at
/// the Barzilai-Borwein step (at least 1), which matters when the objective
/// is nearly flat, e.g. a small weight close to the antipode of the mean.
///
/// Returns a point whose residual norm (for the scaled weights) is
/// <= opts.tol. Throws
/// AntipodalError if an iterate is antipodal to a label of positive weight
/// and ConvergenceError if the budget is exhausted.
inline Vec3 karcher_mean(std::span<const double> weights,
                         std::span<const Vec3> points, const Vec3& init,
                         const KarcherOptions& opts = {}) {
  if (weights.size() != points.size())
    throw Error("karcher_mean: weights and points differ in length");
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw Error("karcher_mean: weights must have positive sum");
  // Normalized weights give the same minimizer and make the unit step a
  // contraction near it.
  std::vector<double> unit(weights.begin(), weights.end());
  if (total != 1.0)
    for (double& w : unit) w /= total;
  weights = unit;
  Vec3 m = init.normalized();
  double f = karcher_objective(weights, points, m);
  double eta0 = opts.armijo.initialStep;
  Vec3 g = karcher_residual(weights, points, m);
  for (int it = 0; it <= opts.maxIters; ++it) {
    const double g2 = g.squaredNorm();
    if (std::sqrt(g2) <= opts.tol) return m;
    if (it == opts.maxIters) break;
    double eta = eta0;
    bool accepted = false;
    // Below the resolution of f the decrease test is meaningless; the
    // residual norm decides instead.
    const bool roundOff = eta * g2 < 1e-12 * std::max(f, 1e-300);
    Vec3 trial, gt;
    for (int h = 0; h <= opts.armijo.maxHalvings; ++h) {
      trial = exp_normalized(m, eta * g);
      const double ft = karcher_objective(weights, points, trial);
      gt = karcher_residual(weights, points, trial);
      const bool ok = roundOff ? gt.squaredNorm() < g2
                               : ft <= f - opts.armijo.sufficientDecrease * eta * g2;
      if (ok) {
        f = ft;
        accepted = true;
        break;
      }
      eta *= opts.armijo.backtrackFactor;
    }
    if (!accepted)
      throw ConvergenceError("karcher_mean: Armijo backtracking failed");
    // Barzilai-Borwein step s.s / s.y for the next search, with s = eta g
    // and y the change of the gradient -g across the step.
    const Vec3 gPrev = transport(m, trial, g);
    const Vec3 step = transport(m, trial, eta * g);
    const double sy = step.dot(gPrev - gt);
    eta0 = sy > 0.0 ? std::clamp(step.squaredNorm() / sy, opts.armijo.initialStep, kMaxKarcherStep)
                    : opts.armijo.initialStep;
    m = trial;
    g = gt;
  }
  throw ConvergenceError("karcher_mean: no convergence within iteration budget");
}

}  // namespace surftv::sphere
