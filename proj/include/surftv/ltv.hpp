#pragma once

// Label-space total variation solved by ADMM on the expanded problem
//
//   min  sum_T |T| phi_T^T s_T + beta sum_e |e| |X_e|
//   s.t. sum_l phi_{T,l} Y_{T,l} = 0
//        exp_{m_T}(Y_{T,l}) = g_l
//        X_e = log_{m_{e+}}(m_{e-})
//
// with scaled multipliers mu (per triangle, tangent at m_T), nu (per triangle
// and label, ambient) and xi (per edge, tangent at m_{e+}).

#include "surftv/atv.hpp"
#include "surftv/labels.hpp"
#include "surftv/mesh.hpp"
#include "surftv/simplex_qp.hpp"
#include "surftv/sphere.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace surftv::ltv {

struct Config {
  double rho = 1.0;
  double primalTol = 1e-4;
  double changeTol = 1e-6;
  int maxIters = 3000;
  double recentralizeEps = 1e-3;
  int yMaxSteps = 100;  // per triangle and outer iteration
  int mMaxSteps = 20;
  ArmijoParams armijo{};
  qp::Options qp{};
  sphere::KarcherOptions karcher{};
};

/// Inputs shared by every subproblem.
struct Problem {
  const LabelMatrix& s;
  const LabelSet& labels;
  const TriangleMesh& mesh;
  const GeometryCache& geom;

  std::size_t num_labels() const { return labels.size(); }
};

/// Y and nu are stored triangle-major: entry T * L + l.
struct State {
  LabelMatrix phi;
  std::vector<Vec3> m;
  std::vector<Vec3> Y;
  std::vector<Vec3> X;
  std::vector<Vec3> mu;
  std::vector<Vec3> nu;
  std::vector<Vec3> xi;
  double rho = 1.0;
  double beta = 0.0;
  int k = 0;
};

/// Inner stopping tolerance at outer iteration k: max(1e-8, 10^(-0.0025 k)).
inline double inner_tolerance(int k) {
  return std::max(1e-8, std::pow(10.0, -0.0025 * static_cast<double>(k)));
}

/// Karcher mean of the labels under `weights`, started at label `start`.
/// When a label of positive weight is antipodal to the start, the start is
/// moved 1e-2 rad off the label first so the iteration is well defined.
inline Vec3 karcher_mean_from_label(std::span<const double> weights,
                                    const LabelSet& labels, std::size_t start,
                                    const sphere::KarcherOptions& opts = {}) {
  Vec3 init = labels[start];
  bool clash = false;
  for (std::size_t l = 0; l < labels.size(); ++l)
    if (weights[l] > 0.0 && sphere::distance(init, labels[l]) > kPi - 1e-6) clash = true;
  if (clash) {
    Eigen::Index axis = 0;
    init.cwiseAbs().minCoeff(&axis);
    const Vec3 dir = sphere::project_tangent(init, Vec3::Unit(axis)).normalized();
    init = sphere::exp_normalized(init, 1e-2 * dir);
  }
  return sphere::karcher_mean(weights, labels.directions(), init, opts);
}

namespace detail {

inline std::span<const double> row(const LabelMatrix& phi, std::size_t t) {
  return {phi.data() + t * static_cast<std::size_t>(phi.cols()),
          static_cast<std::size_t>(phi.cols())};
}

template <class V>
auto block(V& v, std::size_t t, std::size_t L) {
  return std::span(v.data() + t * L, L);
}

inline void check_inputs(const Problem& p) {
  if (p.s.rows() != static_cast<Eigen::Index>(p.mesh.num_triangles()) ||
      p.s.cols() != static_cast<Eigen::Index>(p.labels.size()))
    throw Error("ltv: similarity field does not match mesh and labels");
}

}  // namespace detail

/// phi^0 one-hot at the fidelity argmin recentralized by eps, m^0 the
/// Karcher mean of phi^0 started at that label, Y^0 = log_{m^0}(g),
/// X^0 = log_{m^0_{e+}}(m^0_{e-}), multipliers zero.
inline State init_state(const Problem& p, double beta, const Config& cfg) {
  detail::check_inputs(p);
  if (!(cfg.rho > 0.0)) throw Error("ltv: rho must be positive");
  if (!(beta >= 0.0)) throw Error("ltv: beta must be nonnegative");
  const std::size_t nT = p.mesh.num_triangles();
  const std::size_t L = p.num_labels();
  const std::size_t nE = p.mesh.num_edges();
  const double eps = cfg.recentralizeEps;
  State st;
  st.rho = cfg.rho;
  st.beta = beta;
  st.phi = atv::one_hot_argmin(p.s);
  st.phi = (st.phi.array() + eps) / (1.0 + eps * static_cast<double>(L));
  st.m.resize(nT);
  st.Y.resize(nT * L);
  st.mu.assign(nT, Vec3::Zero());
  st.nu.assign(nT * L, Vec3::Zero());
  for (std::size_t t = 0; t < nT; ++t) {
    Eigen::Index best = 0;
    p.s.row(static_cast<Eigen::Index>(t)).minCoeff(&best);
    st.m[t] = karcher_mean_from_label(detail::row(st.phi, t), p.labels,
                                      static_cast<std::size_t>(best), cfg.karcher);
    for (std::size_t l = 0; l < L; ++l) st.Y[t * L + l] = sphere::log(st.m[t], p.labels[l]);
  }
  st.X.resize(nE);
  st.xi.assign(nE, Vec3::Zero());
  for (std::size_t e = 0; e < nE; ++e) {
    const Edge& ed = p.mesh.edges()[e];
    st.X[e] = sphere::log(st.m[ed.plus], st.m[ed.minus]);
  }
  return st;
}

// ---------------------------------------------------------------------------
// Y-subproblem

namespace detail {

// Y objective restricted to the labels in `idx`; the remaining labels must
// have zero weight so they do not enter the first term.
inline double y_objective_on(const Vec3& m, std::span<const double> phi,
                             std::span<const Vec3> Y, const Vec3& mu,
                             std::span<const Vec3> nu, std::span<const Vec3> g,
                             std::span<const std::size_t> idx) {
  Vec3 r = mu;
  for (std::size_t l : idx) r += phi[l] * Y[l];
  double f = r.squaredNorm();
  for (std::size_t l : idx) f += (sphere::exp(m, Y[l]) - g[l] + nu[l]).squaredNorm();
  return f;
}

inline double y_objective_gradient_on(const Vec3& m, std::span<const double> phi,
                                      std::span<const Vec3> Y, const Vec3& mu,
                                      std::span<const Vec3> nu, std::span<const Vec3> g,
                                      std::span<const std::size_t> idx,
                                      std::span<Vec3> grad) {
  Vec3 r = mu;
  for (std::size_t l : idx) r += phi[l] * Y[l];
  double f = r.squaredNorm();
  for (std::size_t l : idx) {
    const Vec3 e = sphere::exp(m, Y[l]) - g[l] + nu[l];
    f += e.squaredNorm();
    grad[l] = sphere::project_tangent(
        m, 2.0 * phi[l] * r + 2.0 * sphere::diff::exp_adjoint_z(m, Y[l], e));
  }
  return f;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace detail

/// |sum_l phi_l Y_l + mu|^2 + sum_l |exp_m(Y_l) - g_l + nu_l|^2
inline double y_objective(const Vec3& m, std::span<const double> phi,
                          std::span<const Vec3> Y, const Vec3& mu,
                          std::span<const Vec3> nu, std::span<const Vec3> g) {
  const auto idx = detail::all_indices(Y.size());
  return detail::y_objective_on(m, phi, Y, mu, nu, g, idx);
}

/// Objective plus its gradient projected onto the tangent plane at m.
inline double y_objective_gradient(const Vec3& m, std::span<const double> phi,
                                   std::span<const Vec3> Y, const Vec3& mu,
                                   std::span<const Vec3> nu, std::span<const Vec3> g,
                                   std::span<Vec3> grad) {
  const auto idx = detail::all_indices(Y.size());
  return detail::y_objective_gradient_on(m, phi, Y, mu, nu, g, idx, grad);
}

/// Per triangle: labels with phi_l = 0 only enter through
/// |exp_m(Y_l) - c_l|^2, c_l = g_l - nu_l, whose minimizer is
/// Y_l = log_m(c_l / |c_l|); they are set directly. The remaining labels are
/// updated by gradient descent with Armijo backtracking, warm started from
/// the current Y, until the gradient norm is at most inner_tolerance(k),
/// after cfg.yMaxSteps steps, or when the predicted decrease drops below the
/// resolution of the objective.
struct YStats {
  double entryGradient = 0.0;  // area-weighted RMS of the gradient norms on entry
  int maxSteps = 0;
};

inline std::vector<Vec3> y_subproblem(const Problem& p, const State& st,
                                      const Config& cfg, YStats* stats = nullptr) {
  const std::size_t nT = p.mesh.num_triangles();
  const std::size_t L = p.num_labels();
  const double tol = inner_tolerance(st.k);
  const auto g = std::span<const Vec3>(p.labels.directions());
  std::vector<Vec3> out = st.Y;
  std::vector<Vec3> grad(L), trial(L);
  std::vector<std::size_t> idx;
  idx.reserve(L);
  YStats local;
  for (std::size_t t = 0; t < nT; ++t) {
    const auto Yb = detail::block(out, t, L);
    const auto nub = detail::block(st.nu, t, L);
    const auto phi = detail::row(st.phi, t);
    const Vec3& m = st.m[t];
    idx.clear();
    for (std::size_t l = 0; l < L; ++l) {
      if (phi[l] == 0.0) {
        const Vec3 c = g[l] - nub[l];
        const double n = c.norm();
        if (n > 0.0 && sphere::distance(m, c / n) <= sphere::kAntipodalAngle) {
          Yb[l] = sphere::log(m, c / n);
          continue;
        }
      }
      idx.push_back(l);
    }
    if (idx.empty()) continue;
    double f = detail::y_objective_gradient_on(m, phi, Yb, st.mu[t], nub, g, idx, grad);
    std::copy(Yb.begin(), Yb.end(), trial.begin());
    for (int step = 0; step < cfg.yMaxSteps; ++step) {
      double g2 = 0.0;
      for (std::size_t l : idx) g2 += grad[l].squaredNorm();
      if (step == 0) local.entryGradient += p.geom.areas[static_cast<Eigen::Index>(t)] * g2;
      if (step > 0 && std::sqrt(g2) <= tol) break;
      local.maxSteps = std::max(local.maxSteps, step + 1);
      double eta = cfg.armijo.initialStep;
      if (cfg.armijo.sufficientDecrease * eta * g2 <= 1e-13 * f) break;
      bool accepted = false;
      for (int h = 0; h <= cfg.armijo.maxHalvings; ++h) {
        for (std::size_t l : idx) trial[l] = Yb[l] - eta * grad[l];
        const double ft = detail::y_objective_on(m, phi, trial, st.mu[t], nub, g, idx);
        if (ft <= f - cfg.armijo.sufficientDecrease * eta * g2) {
          accepted = true;
          break;
        }
        eta *= cfg.armijo.backtrackFactor;
      }
      if (!accepted)
        throw ConvergenceError("y_subproblem: Armijo backtracking failed on triangle " +
                               std::to_string(t));
      for (std::size_t l : idx) Yb[l] = trial[l];
      f = detail::y_objective_gradient_on(m, phi, Yb, st.mu[t], nub, g, idx, grad);
    }
  }
  local.entryGradient = std::sqrt(local.entryGradient / p.geom.total_area());
  if (stats) *stats = local;
  return out;
}

// ---------------------------------------------------------------------------
// X-subproblem

/// Vector soft thresholding of v_e = log_{m_{e+}}(m_{e-}) + xi_e by beta/rho.
inline std::vector<Vec3> x_subproblem(const Problem& p, const State& st) {
  const double thresh = st.beta / st.rho;
  std::vector<Vec3> out(p.mesh.num_edges());
  for (std::size_t e = 0; e < out.size(); ++e) {
    const Edge& ed = p.mesh.edges()[e];
    const Vec3 v = sphere::log(st.m[ed.plus], st.m[ed.minus]) + st.xi[e];
    const double n = v.norm();
    out[e] = n <= thresh ? Vec3::Zero() : Vec3((1.0 - thresh / n) * v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// phi-subproblem

struct PhiStats {
  int fallbacks = 0;
  int singular = 0;
};

/// Per-triangle QP min phi^T s + rho/2 |Y^T phi + mu|^2 over the simplex,
/// warm started from the current phi.
inline LabelMatrix phi_subproblem(const Problem& p, const State& st,
                                  const Config& cfg, PhiStats* stats = nullptr) {
  const std::size_t nT = p.mesh.num_triangles();
  const std::size_t L = p.num_labels();
  const auto Li = static_cast<Eigen::Index>(L);
  LabelMatrix out(static_cast<Eigen::Index>(nT), Li);
  qp::Problem qpp;
  qpp.rho = st.rho;
  qpp.Y.resize(Li, 3);
  for (std::size_t t = 0; t < nT; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    qpp.s = p.s.row(ti).transpose();
    for (std::size_t l = 0; l < L; ++l)
      qpp.Y.row(static_cast<Eigen::Index>(l)) = st.Y[t * L + l].transpose();
    qpp.mu = st.mu[t];
    const qp::Result r = qp::solve(qpp, st.phi.row(ti).transpose(), cfg.qp);
    out.row(ti) = r.phi.transpose();
    if (stats) {
      stats->fallbacks += r.usedFallback ? 1 : 0;
      stats->singular += r.singular ? 1 : 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// m-subproblem
//
// Transport along a great circle is the restriction of the minimal rotation
// R(m0 -> m), and exp_m(P Y) = R exp_{m0}(Y). The triangle part of the
// objective is therefore sum_l |R E_l - c_l|^2 with E_l = exp_{m0}(Y_l) and
// c_l = g_l - nu_l fixed during the subproblem.

struct MTerms {
  std::vector<Vec3> m0;
  std::vector<Vec3> E;             // T * L + l
  std::vector<Vec3> c;             // T * L + l
  std::vector<Eigen::Matrix3d> M;  // sum_l c_l E_l^T per triangle
  std::vector<Vec3> V;             // xi_e - X_e, tangent at m0_{e+}
};

inline MTerms m_terms(const Problem& p, const State& st) {
  const std::size_t nT = p.mesh.num_triangles();
  const std::size_t L = p.num_labels();
  MTerms d;
  d.m0 = st.m;
  d.E.resize(nT * L);
  d.c.resize(nT * L);
  d.M.assign(nT, Eigen::Matrix3d::Zero());
  for (std::size_t t = 0; t < nT; ++t)
    for (std::size_t l = 0; l < L; ++l) {
      const std::size_t i = t * L + l;
      d.E[i] = sphere::exp(st.m[t], st.Y[i]);
      d.c[i] = p.labels[l] - st.nu[i];
      d.M[t] += d.c[i] * d.E[i].transpose();
    }
  d.V.resize(p.mesh.num_edges());
  for (std::size_t e = 0; e < d.V.size(); ++e) d.V[e] = st.xi[e] - st.X[e];
  return d;
}

/// sum_T |T| sum_l |exp_{m_T}(P Y_{T,l}) - g_l + nu_{T,l}|^2
///   + sum_e |e| |log_{m_{e+}}(m_{e-}) + P (xi_e - X_e)|^2
/// where P transports from the frozen m0 to m.
inline double m_objective(const Problem& p, const MTerms& d, const std::vector<Vec3>& m) {
  const std::size_t L = p.num_labels();
  double f = 0.0;
  for (std::size_t t = 0; t < m.size(); ++t) {
    const Eigen::Matrix3d R = sphere::rotation_between(d.m0[t], m[t]);
    double ft = 0.0;
    for (std::size_t l = 0; l < L; ++l)
      ft += (R * d.E[t * L + l] - d.c[t * L + l]).squaredNorm();
    f += p.geom.areas[static_cast<Eigen::Index>(t)] * ft;
  }
  const auto& edges = p.mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const int a = edges[e].plus, b = edges[e].minus;
    const Vec3 q = sphere::log(m[a], m[b]) + sphere::transport(d.m0[a], m[a], d.V[e]);
    f += p.geom.edgeLengths[static_cast<Eigen::Index>(e)] * q.squaredNorm();
  }
  return f;
}

/// Riemannian gradient of m_objective, one tangent vector per triangle.
inline std::vector<Vec3> m_gradient(const Problem& p, const MTerms& d,
                                    const std::vector<Vec3>& m) {
  std::vector<Vec3> g(m.size());
  for (std::size_t t = 0; t < m.size(); ++t)
    g[t] = -2.0 * p.geom.areas[static_cast<Eigen::Index>(t)] *
           sphere::diff::rotation_pairing_gradient(d.m0[t], m[t], d.M[t]);
  const auto& edges = p.mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const int a = edges[e].plus, b = edges[e].minus;
    const Vec3 q = sphere::log(m[a], m[b]) + sphere::transport(d.m0[a], m[a], d.V[e]);
    const double w = 2.0 * p.geom.edgeLengths[static_cast<Eigen::Index>(e)];
    const auto la = sphere::diff::log_adjoint(m[a], m[b], q);
    g[a] += w * (la.wrtBase + sphere::diff::transport_adjoint_to(d.m0[a], m[a], d.V[e], q));
    g[b] += w * la.wrtTarget;
  }
  for (std::size_t t = 0; t < m.size(); ++t) g[t] = sphere::project_tangent(m[t], g[t]);
  return g;
}

/// Per-triangle metric weights 2 (L |T| + sum_e |e| q_e^2), the curvature
/// scale of m_objective along each m_T. q_e = d / sin d for the distance d
/// between the edge's centers is the stretch of log across the geodesic; it
/// keeps a near-antipodal edge from forcing a tiny step on every triangle.
inline Eigen::VectorXd m_metric_weights(const Problem& p, const std::vector<Vec3>& m) {
  Eigen::VectorXd w = 2.0 * static_cast<double>(p.num_labels()) * p.geom.areas;
  const auto& edges = p.mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double d = sphere::distance(m[edges[e].plus], m[edges[e].minus]);
    const double q = d < 1e-8 ? 1.0 : d / std::max(std::sin(d), 1e-6);
    const double len = 2.0 * p.geom.edgeLengths[static_cast<Eigen::Index>(e)] * q * q;
    w[edges[e].plus] += len;
    w[edges[e].minus] += len;
  }
  return w;
}

struct MStats {
  int steps = 0;
  double entryStep = 0.0;  // stationarity measure on entry
  double finalStep = 0.0;  // ... and on exit
};

/// Riemannian gradient descent with Armijo backtracking on m_objective, in
/// the product metric weighted by m_metric_weights at the current iterate
/// (recomputed every step), so the search direction on triangle T is
/// -grad_T / w_T. At most cfg.mMaxSteps steps; stops early
/// when the area-weighted RMS of |grad_T| / w_T (radians) is at most
/// inner_tolerance(k). Afterwards Y, mu, X and xi are transported to the
/// tangent spaces of the new centers.
inline void m_subproblem(const Problem& p, State& st, const Config& cfg,
                         MStats* stats = nullptr) {
  const MTerms d = m_terms(p, st);
  Eigen::VectorXd w;
  const double tol = inner_tolerance(st.k);
  const std::size_t nT = st.m.size();
  std::vector<Vec3> m = st.m;
  std::vector<Vec3> trial(nT), dir(nT);
  double f = m_objective(p, d, m);
  const double area = p.geom.total_area();
  MStats local;
  for (int step = 0;; ++step) {
    w = m_metric_weights(p, m);
    const std::vector<Vec3> g = m_gradient(p, d, m);
    double slope = 0.0, len = 0.0;
    for (std::size_t t = 0; t < nT; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      dir[t] = -g[t] / w[ti];
      slope += g[t].squaredNorm() / w[ti];
      len += p.geom.areas[ti] * dir[t].squaredNorm();
    }
    local.finalStep = std::sqrt(len / area);
    if (step == 0) local.entryStep = local.finalStep;
    if (step == cfg.mMaxSteps || (step > 0 && local.finalStep <= tol)) break;
    double eta = cfg.armijo.initialStep;
    if (cfg.armijo.sufficientDecrease * eta * slope <= 1e-13 * f) break;
    bool accepted = false;
    for (int h = 0; h <= cfg.armijo.maxHalvings; ++h) {
      for (std::size_t t = 0; t < nT; ++t) trial[t] = sphere::exp_normalized(m[t], eta * dir[t]);
      const double ft = m_objective(p, d, trial);
      if (ft <= f - cfg.armijo.sufficientDecrease * eta * slope) {
        m.swap(trial);
        f = ft;
        accepted = true;
        break;
      }
      eta *= cfg.armijo.backtrackFactor;
    }
    if (!accepted) throw ConvergenceError("m_subproblem: Armijo backtracking failed");
    local.steps = step + 1;
  }

  const std::size_t L = p.num_labels();
  std::vector<Eigen::Matrix3d> R(nT);
  for (std::size_t t = 0; t < nT; ++t) {
    R[t] = sphere::rotation_between(st.m[t], m[t]);
    st.mu[t] = sphere::project_tangent(m[t], R[t] * st.mu[t]);
    for (std::size_t l = 0; l < L; ++l)
      st.Y[t * L + l] = sphere::project_tangent(m[t], R[t] * st.Y[t * L + l]);
  }
  const auto& edges = p.mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const int a = edges[e].plus;
    st.X[e] = sphere::project_tangent(m[a], R[a] * st.X[e]);
    st.xi[e] = sphere::project_tangent(m[a], R[a] * st.xi[e]);
  }
  st.m = std::move(m);
  if (stats) *stats = local;
}

// ---------------------------------------------------------------------------
// Multipliers, residuals, driver

/// Area (or length) weighted RMS of each constraint block:
///   karcher: sum_l phi_l Y_l
///   label:   exp_m(Y_l) - g_l
///   edge:    log_{m_{e+}}(m_{e-}) - X_e
struct Residuals {
  double karcher = 0.0;
  double label = 0.0;
  double edge = 0.0;

  double max() const { return std::max({karcher, label, edge}); }
};

namespace detail {

// Visits each constraint residual: fk(t, r), fl(t, l, r), fe(e, r).
template <class FK, class FL, class FE>
Residuals visit_residuals(const Problem& p, const State& st, FK&& fk, FL&& fl, FE&& fe) {
  const std::size_t nT = p.mesh.num_triangles();
  const std::size_t L = p.num_labels();
  double sk = 0.0, sl = 0.0, se = 0.0;
  for (std::size_t t = 0; t < nT; ++t) {
    const double area = p.geom.areas[static_cast<Eigen::Index>(t)];
    Vec3 r = Vec3::Zero();
    for (std::size_t l = 0; l < L; ++l) {
      r += st.phi(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) * st.Y[t * L + l];
      const Vec3 rl = sphere::exp(st.m[t], st.Y[t * L + l]) - p.labels[l];
      sl += area * rl.squaredNorm();
      fl(t, l, rl);
    }
    sk += area * r.squaredNorm();
    fk(t, r);
  }
  const auto& edges = p.mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Vec3 r = sphere::log(st.m[edges[e].plus], st.m[edges[e].minus]) - st.X[e];
    se += p.geom.edgeLengths[static_cast<Eigen::Index>(e)] * r.squaredNorm();
    fe(e, r);
  }
  const double area = p.geom.total_area();
  const double length = p.geom.edgeLengths.sum();
  Residuals out;
  out.karcher = std::sqrt(sk / area);
  out.label = std::sqrt(sl / area);
  out.edge = edges.empty() ? 0.0 : std::sqrt(se / length);
  return out;
}

}  // namespace detail

inline Residuals constraint_residuals(const Problem& p, const State& st) {
  const auto none = [](auto&&...) {};
  return detail::visit_residuals(p, st, none, none, none);
}

/// mu += sum_l phi_l Y_l, nu += exp_m(Y) - g, xi += log_{m_{e+}}(m_{e-}) - X.
/// Returns the residuals that were added.
inline Residuals update_multipliers(const Problem& p, State& st) {
  const std::size_t L = p.num_labels();
  return detail::visit_residuals(
      p, st, [&](std::size_t t, const Vec3& r) { st.mu[t] += r; },
      [&](std::size_t t, std::size_t l, const Vec3& r) { st.nu[t * L + l] += r; },
      [&](std::size_t e, const Vec3& r) { st.xi[e] += r; });
}

/// Largest |v . base| over Y, mu (based at m_T) and X, xi (based at m_{e+}).
inline double tangency_violation(const Problem& p, const State& st) {
  const std::size_t L = p.num_labels();
  double worst = 0.0;
  for (std::size_t t = 0; t < st.m.size(); ++t) {
    worst = std::max(worst, std::abs(st.mu[t].dot(st.m[t])));
    for (std::size_t l = 0; l < L; ++l)
      worst = std::max(worst, std::abs(st.Y[t * L + l].dot(st.m[t])));
  }
  const auto& edges = p.mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Vec3& base = st.m[edges[e].plus];
    worst = std::max({worst, std::abs(st.X[e].dot(base)), std::abs(st.xi[e].dot(base))});
  }
  return worst;
}

/// sum_T |T| phi_T^T s_T + beta sum_e |e| |X_e|
inline double expanded_objective(const Problem& p, const State& st) {
  double f = (p.geom.areas.asDiagonal() * st.phi).cwiseProduct(p.s).sum();
  for (std::size_t e = 0; e < st.X.size(); ++e)
    f += st.beta * p.geom.edgeLengths[static_cast<Eigen::Index>(e)] * st.X[e].norm();
  return f;
}

struct IterationRecord {
  int k = 0;
  double objective = 0.0;
  Residuals residuals;
  double change = 0.0;        // relative change of (phi, m)
  double stationarity = 0.0;  // max of the Y and m entry measures
  int qpFallbacks = 0;
  double tangency = 0.0;
  double wallSeconds = 0.0;
};

struct Result {
  State state;
  std::vector<IterationRecord> history;
  int iterations = 0;
  bool converged = false;
  double maxTangency = 0.0;  // over all iterations
};

using Observer = std::function<void(const State&, const IterationRecord&)>;

/// One outer iteration: Y, X, phi, m, multipliers.
inline IterationRecord admm_step(const Problem& p, State& st, const Config& cfg) {
  const LabelMatrix phiOld = st.phi;
  const std::vector<Vec3> mOld = st.m;
  YStats ys;
  st.Y = y_subproblem(p, st, cfg, &ys);
  st.X = x_subproblem(p, st);
  PhiStats ps;
  st.phi = phi_subproblem(p, st, cfg, &ps);
  MStats ms;
  m_subproblem(p, st, cfg, &ms);
  IterationRecord rec;
  rec.k = st.k;
  rec.stationarity = std::max(ys.entryGradient, ms.entryStep);
  rec.residuals = update_multipliers(p, st);
  rec.qpFallbacks = ps.fallbacks;
  rec.objective = expanded_objective(p, st);
  rec.tangency = tangency_violation(p, st);

  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < st.m.size(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const double area = p.geom.areas[ti];
    num += area * ((st.phi.row(ti) - phiOld.row(ti)).squaredNorm() +
                   (st.m[t] - mOld[t]).squaredNorm());
    den += area * (phiOld.row(ti).squaredNorm() + mOld[t].squaredNorm());
  }
  rec.change = std::sqrt(num / den);
  ++st.k;
  if (!std::isfinite(rec.residuals.max()) || !std::isfinite(rec.objective))
    throw ConvergenceError("admm: non-finite residual at iteration " + std::to_string(rec.k));
  return rec;
}

/// Runs ADMM from init_state until every residual block and the Y / m
/// stationarity measures are at most cfg.primalTol and the relative change
/// of (phi, m) is at most cfg.changeTol, or for cfg.maxIters iterations.
inline Result solve(const LabelMatrix& s, const LabelSet& labels, const TriangleMesh& mesh,
                    const GeometryCache& geom, double beta, const Config& cfg = {},
                    const Observer& observer = {}) {
  const Problem p{s, labels, mesh, geom};
  const auto start = std::chrono::steady_clock::now();
  Result res;
  res.state = init_state(p, beta, cfg);
  res.maxTangency = tangency_violation(p, res.state);
  for (int it = 0; it < cfg.maxIters; ++it) {
    IterationRecord rec = admm_step(p, res.state, cfg);
    rec.wallSeconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.history.push_back(rec);
    res.iterations = it + 1;
    res.maxTangency = std::max(res.maxTangency, rec.tangency);
    if (observer) observer(res.state, rec);
    if (rec.residuals.max() <= cfg.primalTol && rec.stationarity <= cfg.primalTol &&
        rec.change <= cfg.changeTol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

inline void write_diagnostics_csv(std::ostream& out, const std::vector<IterationRecord>& rows) {
  out << "k,objective,r_karcher,r_label,r_edge,change,stationarity,qp_fallbacks,wall_s\n";
  out.precision(10);
  for (const IterationRecord& r : rows)
    out << r.k << ',' << r.objective << ',' << r.residuals.karcher << ','
        << r.residuals.label << ',' << r.residuals.edge << ',' << r.change << ','
        << r.stationarity << ',' << r.qpFallbacks << ',' << r.wallSeconds << '\n';
}

}  // namespace surftv::ltv
