#pragma once

// Assignment-space total variation: the weighted jump operator, its adjoint,
// and the Chambolle-Pock primal-dual solver.

#include "surftv/mesh.hpp"
#include "surftv/simplex.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace surftv::atv {

/// (K phi)_e = beta (phi_{e+} - phi_{e-}).
inline LabelMatrix jump_apply(const LabelMatrix& phi, double beta,
                              const TriangleMesh& mesh) {
  LabelMatrix out(static_cast<Eigen::Index>(mesh.num_edges()), phi.cols());
  const auto& edges = mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e)
    out.row(static_cast<Eigen::Index>(e)) =
        beta * (phi.row(edges[e].plus) - phi.row(edges[e].minus));
  return out;
}

/// Adjoint of jump_apply with respect to the area-weighted inner product on
/// triangles and the length-weighted inner product on edges:
/// (K* p)_T = beta / |T| sum_{e in T} |e| sign(T, e) p_e.
inline LabelMatrix jump_adjoint(const LabelMatrix& p, double beta,
                                const TriangleMesh& mesh,
                                const GeometryCache& geom) {
  LabelMatrix out = LabelMatrix::Zero(
      static_cast<Eigen::Index>(mesh.num_triangles()), p.cols());
  const auto& edges = mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double w = geom.edgeLengths[static_cast<Eigen::Index>(e)];
    out.row(edges[e].plus) += w * p.row(static_cast<Eigen::Index>(e));
    out.row(edges[e].minus) -= w * p.row(static_cast<Eigen::Index>(e));
  }
  for (Eigen::Index t = 0; t < out.rows(); ++t) out.row(t) *= beta / geom.areas[t];
  return out;
}

/// sum_T |T| u_T . v_T
inline double inner_triangles(const LabelMatrix& u, const LabelMatrix& v,
                              const GeometryCache& geom) {
  return (geom.areas.asDiagonal() * u).cwiseProduct(v).sum();
}

/// sum_e |e| p_e . q_e
inline double inner_edges(const LabelMatrix& p, const LabelMatrix& q,
                          const GeometryCache& geom) {
  return (geom.edgeLengths.asDiagonal() * p).cwiseProduct(q).sum();
}

/// Power iteration on K*K in the weighted inner products (100 iterations or
/// relative change below 1e-6), returning sqrt of the dominant eigenvalue
/// times a 1.01 safety factor. Starts from a fixed pseudo-random vector.
inline double estimate_operator_norm(const TriangleMesh& mesh,
                                     const GeometryCache& geom, double beta) {
  if (beta == 0.0 || mesh.num_triangles() == 0) return 0.0;
  const auto nt = static_cast<Eigen::Index>(mesh.num_triangles());
  LabelMatrix x(nt, 1);
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (Eigen::Index t = 0; t < nt; ++t) x(t, 0) = uni(rng);
  x /= std::sqrt(inner_triangles(x, x, geom));
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    LabelMatrix y = jump_adjoint(jump_apply(x, 1.0, mesh), 1.0, mesh, geom);
    const double next = inner_triangles(x, y, geom);
    const double ny = std::sqrt(inner_triangles(y, y, geom));
    if (ny == 0.0) return 0.0;
    x = y / ny;
    const bool done = it > 0 && std::abs(next - lambda) <= 1e-6 * std::abs(next);
    lambda = next;
    if (done) break;
  }
  return 1.01 * std::abs(beta) * std::sqrt(lambda);
}

struct CpConfig {
  double tau = 1.0;
  double sigma = 1.0;
  double theta = 1.0;
  int maxIters = 20000;
  double primalTol = 1e-7;

  /// tau = sigma = 0.99 / ||K||; unit steps when K vanishes.
  static CpConfig for_operator_norm(double norm) {
    CpConfig c;
    if (norm > 0.0) c.tau = c.sigma = 0.99 / norm;
    return c;
  }

  /// Throws unless tau, sigma > 0, theta in [0, 1] and
  /// tau sigma ||K||^2 <= 1.
  void validate(double norm) const {
    if (!(tau > 0.0) || !(sigma > 0.0)) throw Error("CpConfig: step sizes must be positive");
    if (!(theta >= 0.0 && theta <= 1.0)) throw Error("CpConfig: theta must lie in [0, 1]");
    if (tau * sigma * norm * norm > 1.0)
      throw Error("CpConfig: tau * sigma * ||K||^2 exceeds 1");
    if (maxIters < 0) throw Error("CpConfig: negative iteration budget");
  }
};

struct CpResult {
  LabelMatrix phi;
  LabelMatrix dual;
  int iterations = 0;
  bool converged = false;
};

/// Per-triangle one-hot vector at argmin_l s(T, l), lowest index on ties.
inline LabelMatrix one_hot_argmin(const LabelMatrix& s) {
  LabelMatrix phi = LabelMatrix::Zero(s.rows(), s.cols());
  for (Eigen::Index t = 0; t < s.rows(); ++t) {
    Eigen::Index best = 0;
    s.row(t).minCoeff(&best);
    phi(t, best) = 1.0;
  }
  return phi;
}

using CpObserver = std::function<void(int iteration, const LabelMatrix& phi)>;

/// Chambolle-Pock iteration for
///   min_phi sum_T |T| phi_T^T s_T + beta TV_A(phi),  phi_T in the simplex:
///
///   d   <- clip(d + sigma K phibar, -1, 1)
///   phi <- proj_simplex(phi - tau K* d - tau s)
///   phibar <- phi + theta (phi - phi_old)
///
/// Stops when ||phi_new - phi||_T <= primalTol ||phi||_T or after maxIters.
inline CpResult chambolle_pock(const LabelMatrix& s, double beta,
                               const CpConfig& cfg, const TriangleMesh& mesh,
                               const GeometryCache& geom, LabelMatrix phi0,
                               LabelMatrix d0, const CpObserver& observer = {}) {
  if (!(beta >= 0.0)) throw Error("chambolle_pock: beta must be nonnegative");
  CpResult res;
  res.phi = std::move(phi0);
  res.dual = std::move(d0);
  LabelMatrix phiBar = res.phi;
  LabelMatrix phiOld;
  const Eigen::Index nt = res.phi.rows();
  Eigen::VectorXd row(res.phi.cols());
  for (int k = 0; k < cfg.maxIters; ++k) {
    res.dual += cfg.sigma * jump_apply(phiBar, beta, mesh);
    res.dual = res.dual.cwiseMax(-1.0).cwiseMin(1.0);

    phiOld = res.phi;
    const LabelMatrix kd = jump_adjoint(res.dual, beta, mesh, geom);
    for (Eigen::Index t = 0; t < nt; ++t) {
      row = (res.phi.row(t) - cfg.tau * kd.row(t) - cfg.tau * s.row(t)).transpose();
      res.phi.row(t) = simplex::project(row).transpose();
    }
    phiBar = res.phi + cfg.theta * (res.phi - phiOld);
    res.iterations = k + 1;
    if (!res.phi.allFinite() || !res.dual.allFinite())
      throw ConvergenceError("chambolle_pock: non-finite iterate");
    if (observer) observer(res.iterations, res.phi);

    const LabelMatrix diff = res.phi - phiOld;
    const double change = std::sqrt(inner_triangles(diff, diff, geom));
    const double base = std::sqrt(inner_triangles(phiOld, phiOld, geom));
    if (change <= cfg.primalTol * base) {
      res.converged = true;
      break;
    }
  }
  return res;
}

/// Solves the A-TV model with default step sizes, one-hot argmin start and
/// zero dual.
inline CpResult solve(const LabelMatrix& s, double beta, const TriangleMesh& mesh,
                      const GeometryCache& geom, int maxIters = 20000,
                      double primalTol = 1e-7) {
  const double norm = estimate_operator_norm(mesh, geom, beta);
  CpConfig cfg = CpConfig::for_operator_norm(norm);
  cfg.maxIters = maxIters;
  cfg.primalTol = primalTol;
  cfg.validate(norm);
  return chambolle_pock(s, beta, cfg, mesh, geom, one_hot_argmin(s),
                        LabelMatrix::Zero(static_cast<Eigen::Index>(mesh.num_edges()),
                                          s.cols()));
}

}  // namespace surftv::atv
