#pragma once

// Running either model on a noisy fixture and scoring it against the clean
// zero-regularization labeling, singly or over a grid of beta values.

#include "surftv/atv.hpp"
#include "surftv/labels.hpp"
#include "surftv/ltv.hpp"
#include "surftv/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>

namespace surftv {

enum class Model { Atv, Ltv };

inline Model parse_model(const std::string& name) {
  if (name == "atv") return Model::Atv;
  if (name == "ltv") return Model::Ltv;
  throw Error("unknown model '" + name + "' (expected atv or ltv)");
}

inline std::string model_name(Model m) { return m == Model::Atv ? "atv" : "ltv"; }

/// A noisy mesh with its similarity field, plus the reference labeling
/// computed on the clean mesh it came from.
struct Fixture {
  TriangleMesh mesh;
  GeometryCache geom;
  LabelSet labels;
  LabelMatrix s;
  HardLabeling reference;
};

/// Noise with variance factor c and the given seed is applied to `clean`;
/// the reference is the similarity argmin on `clean`.
inline Fixture make_fixture(const TriangleMesh& clean, const LabelSet& labels,
                            double noiseVarFactor, std::uint64_t seed) {
  Fixture f{add_vertex_noise(clean, noiseVarFactor, seed), {}, labels, {}, {}};
  f.geom = compute_geometry(f.mesh);
  f.s = similarity_field(f.geom.normals, labels);
  f.reference = argmin_labels(similarity_field(compute_geometry(clean).normals, labels));
  return f;
}

struct SolverSettings {
  int atvMaxIters = 20000;
  double atvTol = 1e-7;
  bool atvTrace = false;  // record objective and change per CP iteration
  ltv::Config ltv{};
};

struct AtvRecord {
  int k = 0;
  double objective = 0.0;
  double change = 0.0;  // relative, area-weighted
};

struct Segmentation {
  Model model = Model::Atv;
  double beta = 0.0;
  LabelMatrix phi;
  std::vector<Vec3> m;  // L-TV only
  HardLabeling hard;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double runtimeSeconds = 0.0;
  std::vector<AtvRecord> atvTrace;  // A-TV with settings.atvTrace
  // L-TV only
  std::vector<ltv::IterationRecord> history;
  double maxTangency = 0.0;
};

/// Runs one model. The objective is objective_atv / objective_ltv of the
/// returned assignment (NaN for L-TV when a Karcher mean of phi does not
/// converge); hard labels follow the model's extraction rule.
inline Segmentation segment(Model model, const TriangleMesh& mesh, const GeometryCache& geom,
                            const LabelSet& labels, const LabelMatrix& s, double beta,
                            const SolverSettings& settings,
                            const ltv::Observer& observer = {}) {
  const auto start = std::chrono::steady_clock::now();
  Segmentation out;
  out.model = model;
  out.beta = beta;
  if (model == Model::Atv) {
    atv::CpObserver trace;
    LabelMatrix prev = atv::one_hot_argmin(s);
    if (settings.atvTrace)
      trace = [&](int k, const LabelMatrix& phi) {
        const LabelMatrix d = phi - prev;
        const double change = std::sqrt(atv::inner_triangles(d, d, geom) /
                                         atv::inner_triangles(prev, prev, geom));
        out.atvTrace.push_back({k, objective_atv(phi, s, beta, mesh, geom), change});
        prev = phi;
      };
    const double norm = atv::estimate_operator_norm(mesh, geom, beta);
    atv::CpConfig cfg = atv::CpConfig::for_operator_norm(norm);
    cfg.maxIters = settings.atvMaxIters;
    cfg.primalTol = settings.atvTol;
    cfg.validate(norm);
    atv::CpResult r = atv::chambolle_pock(
        s, beta, cfg, mesh, geom, atv::one_hot_argmin(s),
        LabelMatrix::Zero(static_cast<Eigen::Index>(mesh.num_edges()), s.cols()), trace);
    out.phi = std::move(r.phi);
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.hard = hard_labels_atv(out.phi);
    out.objective = objective_atv(out.phi, s, beta, mesh, geom);
  } else {
    ltv::Result r = ltv::solve(s, labels, mesh, geom, beta, settings.ltv, observer);
    out.phi = std::move(r.state.phi);
    out.m = std::move(r.state.m);
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.history = std::move(r.history);
    out.maxTangency = r.maxTangency;
    out.hard = hard_labels_ltv(out.m, labels);
    out.objective =
        score_or_nan([&] { return objective_ltv(out.phi, s, beta, labels, mesh, geom); });
  }
  out.runtimeSeconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline Segmentation segment(Model model, const Fixture& f, double beta,
                            const SolverSettings& settings) {
  return segment(model, f.mesh, f.geom, f.labels, f.s, beta, settings);
}

struct SweepRow {
  double beta = 0.0;
  double correctness = std::numeric_limits<double>::quiet_NaN();
  int labelsUsed = 0;
  int labelsUsedByArea = 0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool converged = false;
  double runtimeSeconds = 0.0;
  std::optional<std::string> error;
  // L-TV only: residuals of the last iteration and the largest tangency
  // violation seen.
  std::optional<ltv::Residuals> finalResiduals;
  double maxTangency = 0.0;
};

struct SweepReport {
  Model model = Model::Atv;
  std::vector<SweepRow> rows;

  /// Row of the largest correctness among rows without error (first on
  /// ties). Throws when every row failed.
  std::size_t best_index() const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (!rows[i].error && (!best || rows[i].correctness > rows[*best].correctness)) best = i;
    if (!best) throw Error("sweep: no successful row");
    return *best;
  }
  double best_beta() const { return rows[best_index()].beta; }

  /// Row with the given beta (exact match).
  const SweepRow& at(double beta) const {
    for (const SweepRow& r : rows)
      if (r.beta == beta) return r;
    throw Error("sweep: no row for beta " + std::to_string(beta));
  }
};

/// base * 2^k for k = -3..3
inline std::vector<double> default_beta_grid(double base) {
  std::vector<double> g;
  for (int k = -3; k <= 3; ++k) g.push_back(std::ldexp(base, k));
  return g;
}

inline SweepRow score(const Segmentation& seg, const Fixture& f) {
  SweepRow row;
  row.beta = seg.beta;
  row.correctness = correctness(seg.hard, f.reference, f.geom.areas);
  const LabelUsage u = labels_used(seg.hard, f.geom.areas);
  row.labelsUsed = u.any;
  row.labelsUsedByArea = u.byArea;
  row.objective = seg.objective;
  row.iterations = seg.iterations;
  row.converged = seg.converged;
  row.runtimeSeconds = seg.runtimeSeconds;
  if (!seg.history.empty()) row.finalResiduals = seg.history.back().residuals;
  row.maxTangency = seg.maxTangency;
  return row;
}

/// Solves the model once per grid value (sorted ascending; duplicates and
/// negative values are rejected). With jobs > 1 rows run on that many
/// threads; results do not depend on jobs. A row whose solver throws keeps
/// its error message and is skipped when choosing beta*.
inline SweepReport beta_sweep(Model model, std::vector<double> grid, const Fixture& f,
                              const SolverSettings& settings, int jobs = 1) {
  if (grid.empty()) throw Error("beta_sweep: empty grid");
  std::sort(grid.begin(), grid.end());
  if (grid.front() < 0.0 || !std::isfinite(grid.back()))
    throw Error("beta_sweep: beta values must be finite and nonnegative");
  if (std::adjacent_find(grid.begin(), grid.end()) != grid.end())
    throw Error("beta_sweep: duplicate beta values");

  SweepReport rep;
  rep.model = model;
  rep.rows.resize(grid.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        rep.rows[i] = score(segment(model, f, grid[i], settings), f);
      } catch (const std::exception& e) {
        rep.rows[i] = SweepRow{};
        rep.rows[i].beta = grid[i];
        rep.rows[i].error = e.what();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::clamp<int>(jobs, 1, static_cast<int>(grid.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  return rep;
}

/// The six fixed columns followed by labels_used_area (labels covering at
/// least 0.1% of the area). Failed rows carry nan values.
inline void write_sweep_csv(std::ostream& out, const SweepReport& rep) {
  out << "beta,correctness,labels_used,objective,iterations,runtime_s,labels_used_area\n";
  out.precision(10);
  for (const SweepRow& r : rep.rows)
    out << r.beta << ',' << r.correctness << ',' << r.labelsUsed << ',' << r.objective << ','
        << r.iterations << ',' << r.runtimeSeconds << ',' << r.labelsUsedByArea << '\n';
}

}  // namespace surftv
