#pragma once

// Fisher-Rao geometry on the open probability simplex and Euclidean
// projections used by the solvers.

#include "surftv/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace surftv::simplex {

/// Points with a coordinate at or below this are treated as boundary points
/// by the exponential map.
inline constexpr double kInteriorThreshold = 1e-12;

/// Exponential map of the Fisher-Rao metric at an interior point phi, in
/// the closed form obtained from the isometry p -> 2 sqrt(p) onto a sphere
/// of radius 2:
///
///   exp_phi(X) = 1/2 (phi + Xp^2/|Xp|^2) + 1/2 (phi - Xp^2/|Xp|^2) cos|Xp|
///                + sin|Xp| / |Xp| * Xp .* sqrt(phi),      Xp = X ./ sqrt(phi)
template <class DerivedP, class DerivedX>
Eigen::VectorXd exp(const Eigen::MatrixBase<DerivedP>& phi,
                    const Eigen::MatrixBase<DerivedX>& x) {
  if (phi.minCoeff() <= kInteriorThreshold)
    throw Error("simplex::exp: base point on the simplex boundary");
  const Eigen::VectorXd sq = phi.derived().array().sqrt().matrix().eval();
  const Eigen::VectorXd xp = (x.array() / sq.array()).matrix();
  const double n = xp.norm();
  Eigen::VectorXd base = phi;
  if (n == 0.0) return base;
  const Eigen::ArrayXd dir2 = xp.array().square() / (n * n);
  const double sincN = n < 1e-8 ? 1.0 : std::sin(n) / n;
  Eigen::VectorXd out =
      (0.5 * (base.array() + dir2) + 0.5 * (base.array() - dir2) * std::cos(n) +
       sincN * xp.array() * sq.array())
          .matrix();
  return out;
}

/// Riemannian gradient under the Fisher-Rao metric from the Euclidean
/// gradient g: g .* phi - (phi^T g) phi. Coordinates sum to zero.
template <class DerivedP, class DerivedG>
Eigen::VectorXd riemannian_gradient(const Eigen::MatrixBase<DerivedP>& phi,
                                    const Eigen::MatrixBase<DerivedG>& g) {
  const double pg = phi.dot(g);
  return (g.array() * phi.array()).matrix() - pg * phi;
}

/// Euclidean projection onto the closed probability simplex by sort-based
/// thresholding.
template <class Derived>
Eigen::VectorXd project(const Eigen::MatrixBase<Derived>& v) {
  const Eigen::Index n = v.size();
  Eigen::VectorXd u = v;
  std::sort(u.data(), u.data() + n, std::greater<>());
  double cumsum = 0.0;
  double shift = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumsum += u[k];
    const double t = (1.0 - cumsum) / static_cast<double>(k + 1);
    if (u[k] + t > 0.0) shift = t;
  }
  return (v.array() + shift).max(0.0).matrix();
}

/// Componentwise clamp to [lo, hi].
template <class Derived>
Eigen::VectorXd clip_box(const Eigen::MatrixBase<Derived>& v, double lo,
                         double hi) {
  if (lo > hi) throw Error("simplex::clip_box: lo > hi");
  return v.array().max(lo).min(hi).matrix();
}

}  // namespace surftv::simplex
