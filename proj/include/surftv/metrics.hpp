#pragma once

// Total variation functionals, model objectives, hard labelings and the
// area-weighted correctness score.

#include "surftv/labels.hpp"
#include "surftv/ltv.hpp"
#include "surftv/mesh.hpp"

#include <limits>
#include <map>
#include <vector>

namespace surftv {

/// Per-triangle label index, 0-based.
using HardLabeling = std::vector<int>;

/// sum_e |e| |phi_{e+} - phi_{e-}|_1
inline double tv_assignment(const LabelMatrix& phi, const TriangleMesh& mesh,
                            const GeometryCache& geom) {
  double tv = 0.0;
  const auto& edges = mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e)
    tv += geom.edgeLengths[static_cast<Eigen::Index>(e)] *
          (phi.row(edges[e].plus) - phi.row(edges[e].minus)).lpNorm<1>();
  return tv;
}

/// sum_e |e| d(m_{e+}, m_{e-})
inline double tv_centers(const std::vector<Vec3>& m, const TriangleMesh& mesh,
                         const GeometryCache& geom) {
  double tv = 0.0;
  const auto& edges = mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e)
    tv += geom.edgeLengths[static_cast<Eigen::Index>(e)] *
          sphere::distance(m[edges[e].plus], m[edges[e].minus]);
  return tv;
}

/// Karcher options for scoring. Rows of a solver's phi can be nearly
/// degenerate (weight split between antipodal labels), so the iteration
/// budget is larger than the solver default.
inline sphere::KarcherOptions scoring_karcher_options() {
  sphere::KarcherOptions o;
  o.maxIters = 1000;
  return o;
}

/// Karcher mean of every row of phi, each started at the row's largest
/// weight (lowest index on ties).
inline std::vector<Vec3> karcher_centers(const LabelMatrix& phi, const LabelSet& labels,
                                         const sphere::KarcherOptions& opts =
                                             scoring_karcher_options()) {
  if (phi.cols() != static_cast<Eigen::Index>(labels.size()))
    throw Error("karcher_centers: assignment width does not match label count");
  std::vector<Vec3> m(static_cast<std::size_t>(phi.rows()));
  for (Eigen::Index t = 0; t < phi.rows(); ++t) {
    Eigen::Index best = 0;
    phi.row(t).maxCoeff(&best);
    m[static_cast<std::size_t>(t)] = ltv::karcher_mean_from_label(
        ltv::detail::row(phi, static_cast<std::size_t>(t)), labels,
        static_cast<std::size_t>(best), opts);
  }
  return m;
}

/// sum_e |e| d(m_{e+}, m_{e-}) with m the per-triangle Karcher means of phi.
inline double tv_label(const LabelMatrix& phi, const LabelSet& labels,
                       const TriangleMesh& mesh, const GeometryCache& geom) {
  return tv_centers(karcher_centers(phi, labels), mesh, geom);
}

/// sum_T |T| phi_T^T s_T
inline double fidelity(const LabelMatrix& phi, const LabelMatrix& s, const GeometryCache& geom) {
  return (geom.areas.asDiagonal() * phi).cwiseProduct(s).sum();
}

inline double objective_atv(const LabelMatrix& phi, const LabelMatrix& s, double beta,
                            const TriangleMesh& mesh, const GeometryCache& geom) {
  return fidelity(phi, s, geom) + beta * tv_assignment(phi, mesh, geom);
}

inline double objective_ltv(const LabelMatrix& phi, const LabelMatrix& s, double beta,
                            const LabelSet& labels, const TriangleMesh& mesh,
                            const GeometryCache& geom) {
  return fidelity(phi, s, geom) + beta * tv_label(phi, labels, mesh, geom);
}

/// Value of a scoring function, or NaN when a Karcher mean it needs does not
/// converge (nearly degenerate rows, see scoring_karcher_options).
template <class F>
double score_or_nan(F&& score) {
  try {
    return score();
  } catch (const ConvergenceError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

/// argmax_l phi_{T,l}, lowest index on ties.
inline HardLabeling hard_labels_atv(const LabelMatrix& phi) {
  HardLabeling out(static_cast<std::size_t>(phi.rows()));
  for (Eigen::Index t = 0; t < phi.rows(); ++t) {
    Eigen::Index best = 0;
    phi.row(t).maxCoeff(&best);
    out[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return out;
}

/// argmin_l d(m_T, g_l), lowest index on ties.
inline HardLabeling hard_labels_ltv(const std::vector<Vec3>& m, const LabelSet& labels) {
  HardLabeling out(m.size());
  for (std::size_t t = 0; t < m.size(); ++t) {
    int best = 0;
    double bestD = sphere::distance(m[t], labels[0]);
    for (std::size_t l = 1; l < labels.size(); ++l) {
      const double d = sphere::distance(m[t], labels[l]);
      if (d < bestD) {
        bestD = d;
        best = static_cast<int>(l);
      }
    }
    out[t] = best;
  }
  return out;
}

/// argmin_l s_{T,l}, lowest index on ties; the zero-regularization labeling.
inline HardLabeling argmin_labels(const LabelMatrix& s) {
  HardLabeling out(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index t = 0; t < s.rows(); ++t) {
    Eigen::Index best = 0;
    s.row(t).minCoeff(&best);
    out[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return out;
}

/// Fraction of the total area whose predicted label matches the reference.
inline double correctness(const HardLabeling& pred, const HardLabeling& reference,
                          const Eigen::VectorXd& areas) {
  if (pred.size() != reference.size() || pred.size() != static_cast<std::size_t>(areas.size()))
    throw Error("correctness: labelings and areas differ in length");
  double hit = 0.0, total = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double a = areas[static_cast<Eigen::Index>(t)];
    total += a;
    if (pred[t] == reference[t]) hit += a;
  }
  return hit / total;
}

struct LabelUsage {
  int any = 0;     // labels assigned to at least one triangle
  int byArea = 0;  // labels covering at least areaFraction of the total area
};

inline LabelUsage labels_used(const HardLabeling& labels, const Eigen::VectorXd& areas,
                              double areaFraction = 1e-3) {
  std::map<int, double> cover;
  for (std::size_t t = 0; t < labels.size(); ++t)
    cover[labels[t]] += areas[static_cast<Eigen::Index>(t)];
  LabelUsage u;
  const double total = areas.sum();
  for (const auto& [l, a] : cover) {
    ++u.any;
    if (a >= areaFraction * total) ++u.byArea;
  }
  return u;
}

}  // namespace surftv
