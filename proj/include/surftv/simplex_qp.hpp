#pragma once

// Per-triangle simplex-constrained QP of the L-TV assignment update:
//
//   min_{phi in simplex}  phi^T s + rho/2 |Y^T phi + mu|^2
//
// where Y is L x 3 (one tangent vector per label) and mu a 3-vector.
// Solved in two stages: Riemannian gradient descent on the open simplex to
// identify the zero pattern, then an equality-constrained KKT solve on the
// estimated support.

#include "surftv/simplex.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace surftv::qp {

using LabelVectors = Eigen::Matrix<double, Eigen::Dynamic, 3>;

struct Problem {
  Eigen::VectorXd s;
  LabelVectors Y;
  Vec3 mu = Vec3::Zero();
  double rho = 1.0;

  double objective(const Eigen::VectorXd& phi) const {
    const Vec3 r = Y.transpose() * phi + mu;
    return phi.dot(s) + 0.5 * rho * r.squaredNorm();
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& phi) const {
    const Vec3 r = Y.transpose() * phi + mu;
    return s + rho * (Y * r);
  }
};

struct Options {
  double recentralizeEps = 1e-3;
  double gradTol = 1e-8;      // stage 1 stops when |grad| falls below
  double boundaryTol = 1e-8;  // ... or when min phi falls below
  double activeTol = 1e-6;    // phi_l <= activeTol is fixed to zero
  int maxStage1Iters = 2000;
  int maxRefinements = 8;  // active-set corrections before falling back
  ArmijoParams armijo{};
};

struct KktSolution {
  Eigen::VectorXd phi;
  Eigen::VectorXd alpha;  // multipliers of phi_l = 0, zero off the active set
  double gamma = 0.0;     // multiplier of 1^T phi = 1
};

/// Solves
///   rho Y Y^T phi + rho Y mu + s - alpha - gamma 1 = 0,  1^T phi = 1,
///   phi_l = 0 (l active),  alpha_l = 0 (l inactive)
/// by eliminating the active coordinates. Returns nullopt when the reduced
/// system is singular.
inline std::optional<KktSolution> solve_kkt_active_set(const Problem& p,
                                                       const std::vector<bool>& active) {
  const Eigen::Index L = p.s.size();
  if (static_cast<Eigen::Index>(active.size()) != L)
    throw Error("solve_kkt_active_set: active mask length mismatch");
  std::vector<Eigen::Index> inactive;
  for (Eigen::Index l = 0; l < L; ++l)
    if (!active[static_cast<std::size_t>(l)]) inactive.push_back(l);
  const auto n = static_cast<Eigen::Index>(inactive.size());
  if (n == 0) throw Error("solve_kkt_active_set: every coordinate is active");

  LabelVectors yi(n, 3);
  Eigen::VectorXd rhs(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    yi.row(i) = p.Y.row(inactive[i]);
    rhs[i] = -(p.rho * p.Y.row(inactive[i]).dot(p.mu) + p.s[inactive[i]]);
  }
  rhs[n] = 1.0;
  Eigen::MatrixXd kkt(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = p.rho * yi * yi.transpose();
  kkt.topRightCorner(n, 1).setConstant(-1.0);
  kkt.bottomLeftCorner(1, n).setOnes();
  kkt(n, n) = 0.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  lu.setThreshold(1e-10);
  if (lu.rank() < n + 1) return std::nullopt;
  const Eigen::VectorXd sol = lu.solve(rhs);

  KktSolution out;
  out.phi = Eigen::VectorXd::Zero(L);
  for (Eigen::Index i = 0; i < n; ++i) out.phi[inactive[i]] = sol[i];
  out.gamma = sol[n];
  const Eigen::VectorXd grad = p.gradient(out.phi);
  out.alpha = Eigen::VectorXd::Zero(L);
  for (Eigen::Index l = 0; l < L; ++l)
    if (active[static_cast<std::size_t>(l)]) out.alpha[l] = grad[l] - out.gamma;
  return out;
}

struct Result {
  Eigen::VectorXd phi;
  bool usedFallback = false;
  bool singular = false;
  int stage1Iters = 0;
  int refinements = 0;
};

namespace detail {

inline constexpr double kFeasTol = 1e-12;

inline bool is_kkt_point(const KktSolution& k) {
  return k.phi.minCoeff() >= -kFeasTol && k.alpha.minCoeff() >= -kFeasTol;
}

// Single-index corrections of an active set: a negative phi_l joins the
// active set, a negative alpha_l leaves it, and a singular system activates
// the inactive index with the smallest `priority` other than the one freed
// last. Returns the first KKT point reached within maxRounds corrections.
inline std::optional<KktSolution> refine_active_set(const Problem& p,
                                                    std::vector<bool> active,
                                                    const Eigen::VectorXd& priority,
                                                    int maxRounds, Result& stats) {
  const Eigen::Index L = p.s.size();
  Eigen::Index lastFreed = -1;
  for (int round = 0; round <= maxRounds; ++round) {
    const auto kkt = solve_kkt_active_set(p, active);
    if (!kkt) {
      stats.singular = true;
      Eigen::Index drop = -1;
      for (Eigen::Index l = 0; l < L; ++l)
        if (!active[static_cast<std::size_t>(l)] && l != lastFreed &&
            (drop < 0 || priority[l] < priority[drop]))
          drop = l;
      if (drop < 0) return std::nullopt;
      active[static_cast<std::size_t>(drop)] = true;
      if (std::none_of(active.begin(), active.end(), [](bool a) { return !a; }))
        return std::nullopt;
      continue;
    }
    if (is_kkt_point(*kkt)) {
      stats.singular = false;
      stats.refinements = round;
      return kkt;
    }
    Eigen::Index worstPhi = 0, worstAlpha = 0;
    const double minPhi = kkt->phi.minCoeff(&worstPhi);
    kkt->alpha.minCoeff(&worstAlpha);
    if (minPhi < -kFeasTol) {
      active[static_cast<std::size_t>(worstPhi)] = true;
      if (std::none_of(active.begin(), active.end(), [](bool a) { return !a; }))
        return std::nullopt;
    } else {
      active[static_cast<std::size_t>(worstAlpha)] = false;
      lastFreed = worstAlpha;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Stage 1: recentralize phi0 into the open simplex and run Riemannian
/// gradient descent with Armijo backtracking. Coordinates that fall below
/// boundaryTol are pinned to zero and the descent continues on the remaining
/// face until the gradient is below gradTol. Stage 2: fix coordinates
/// <= activeTol to zero and solve the KKT system, correcting the active set
/// one index at a time (at most maxRefinements times) until phi >= 0 and
/// alpha >= 0. If that fails the stage-1 iterate is returned as a fallback.
///
/// The QP is convex, so any KKT point is optimal. Stage 1 therefore also
/// tries the KKT system on candidate supports at regular intervals and stops
/// as soon as one certifies: the k largest coordinates for k <= 4 (Y has
/// rank <= 3, so generic supports are no larger), and the coordinates the
/// descent is currently growing, followed by active-set corrections.
inline Result solve(const Problem& p, const Eigen::VectorXd& phi0,
                    const Options& opts = {}) {
  const Eigen::Index L = p.s.size();
  Result res;
  Eigen::VectorXd phi = (phi0.array() + opts.recentralizeEps).matrix() /
                        (1.0 + opts.recentralizeEps * static_cast<double>(L));
  const auto accept = [&](const KktSolution& kkt) {
    res.phi = kkt.phi.cwiseMax(0.0);
    res.phi /= res.phi.sum();
    return res;
  };

  std::vector<bool> active(static_cast<std::size_t>(L));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(L));
  const auto certify = [&](const Eigen::VectorXd& g) -> std::optional<KktSolution> {
    for (Eigen::Index l = 0; l < L; ++l) order[static_cast<std::size_t>(l)] = l;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return phi[a] > phi[b] || (phi[a] == phi[b] && a < b);
    });
    std::fill(active.begin(), active.end(), true);
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(L, 4); ++k) {
      active[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = false;
      const auto kkt = solve_kkt_active_set(p, active);
      if (kkt && detail::is_kkt_point(*kkt)) return kkt;
    }
    const double mean = phi.dot(g);
    for (Eigen::Index l = 0; l < L; ++l)
      active[static_cast<std::size_t>(l)] = !(g[l] < mean || l == order[0]);
    Result scratch;
    return detail::refine_active_set(p, active, phi, opts.maxRefinements, scratch);
  };

  // Indices of the face of the simplex the iterate currently lives on.
  std::vector<Eigen::Index> support(static_cast<std::size_t>(L));
  for (Eigen::Index l = 0; l < L; ++l) support[static_cast<std::size_t>(l)] = l;
  Eigen::VectorXd sub, subGrad;
  for (int j = 0; j < opts.maxStage1Iters; ++j) {
    std::erase_if(support, [&](Eigen::Index l) {
      if (phi[l] > opts.boundaryTol) return false;
      phi[l] = 0.0;
      return true;
    });
    phi /= phi.sum();
    const Eigen::VectorXd g = p.gradient(phi);
    if (j < 8 || j % 4 == 0) {
      if (const auto kkt = certify(g)) {
        res.stage1Iters = j;
        return accept(*kkt);
      }
    }
    if (support.size() <= 1) break;
    const double f = p.objective(phi);
    const auto n = static_cast<Eigen::Index>(support.size());
    sub.resize(n);
    subGrad.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      sub[i] = phi[support[static_cast<std::size_t>(i)]];
      subGrad[i] = g[support[static_cast<std::size_t>(i)]];
    }
    const Eigen::VectorXd rg = simplex::riemannian_gradient(sub, subGrad);
    if (rg.norm() <= opts.gradTol) break;
    // Directional derivative along -rg; equals the squared Fisher-Rao norm.
    const double slope = subGrad.dot(rg);
    double eta = opts.armijo.initialStep;
    bool accepted = false;
    Eigen::VectorXd trial = phi;
    for (int h = 0; h <= opts.armijo.maxHalvings; ++h) {
      Eigen::VectorXd step = simplex::exp(sub, -eta * rg).cwiseMax(0.0);
      step /= step.sum();
      for (Eigen::Index i = 0; i < n; ++i) trial[support[static_cast<std::size_t>(i)]] = step[i];
      if (p.objective(trial) <= f - opts.armijo.sufficientDecrease * eta * slope) {
        phi = trial;
        accepted = true;
        break;
      }
      eta *= opts.armijo.backtrackFactor;
    }
    res.stage1Iters = j + 1;
    if (!accepted) break;
  }

  for (Eigen::Index l = 0; l < L; ++l)
    active[static_cast<std::size_t>(l)] = phi[l] <= opts.activeTol;
  if (std::any_of(active.begin(), active.end(), [](bool a) { return !a; }))
    if (const auto kkt = detail::refine_active_set(p, active, phi, opts.maxRefinements, res))
      return accept(*kkt);
  res.usedFallback = true;
  res.phi = phi;
  return res;
}

}  // namespace surftv::qp
