#include "support.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

using namespace surftv;
namespace st = surftv::testing;

namespace {

// g1 = x, g2 = y, g3 halfway between them
LabelSet example_labels() {
  return LabelSet({Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0).normalized()});
}

}  // namespace

TEST(TvAssignment, SingleJumpAndIntermediateStrip) {
  const TriangleMesh m = st::capped_prism();
  const GeometryCache g = compute_geometry(m);
  // top cap + band on g1, bottom cap on g2: one interface of length 1
  const std::vector<int> jump = {0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1};
  EXPECT_NEAR(tv_assignment(st::one_hot(jump, 3), m, g), 2.0, 1e-12);
  // band on the intermediate label: two interfaces of length 1
  const std::vector<int> strip = {0, 0, 0, 2, 2, 2, 2, 2, 2, 1, 1, 1};
  EXPECT_NEAR(tv_assignment(st::one_hot(strip, 3), m, g), 4.0, 1e-12);
  EXPECT_EQ(tv_assignment(LabelMatrix::Constant(12, 3, 1.0 / 3), m, g), 0.0);
}

TEST(TvLabel, NoExtraPenaltyForIntermediateLabel) {
  const TriangleMesh m = st::capped_prism();
  const GeometryCache g = compute_geometry(m);
  const LabelSet labels = example_labels();
  const std::vector<int> jump = {0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1};
  const std::vector<int> strip = {0, 0, 0, 2, 2, 2, 2, 2, 2, 1, 1, 1};
  EXPECT_NEAR(tv_label(st::one_hot(jump, 3), labels, m, g), kPi / 2, 1e-12);
  EXPECT_NEAR(tv_label(st::one_hot(strip, 3), labels, m, g), kPi / 2, 1e-12);
  EXPECT_EQ(tv_label(st::one_hot(std::vector<int>(12, 2), 3), labels, m, g), 0.0);
}

TEST(TvBounds, RandomFields) {
  std::mt19937_64 rng(31);
  const TriangleMesh m = icosphere(1);
  const GeometryCache g = compute_geometry(m);
  const LabelSet labels = equator_pole_labels(6);
  const double totalLength = g.edgeLengths.sum();
  for (int i = 0; i < 20; ++i) {
    LabelMatrix phi(static_cast<Eigen::Index>(m.num_triangles()), 8);
    std::vector<int> hard;
    for (Eigen::Index t = 0; t < phi.rows(); ++t) {
      phi.row(t) = st::random_simplex_point(rng, 8).transpose();
      hard.push_back(static_cast<int>(rng() % 6));  // equator labels only
    }
    const double ta = tv_assignment(phi, m, g);
    EXPECT_GE(ta, 0.0);
    EXPECT_LE(ta, 2 * totalLength);
    // one-hot fields: tv_label is the length-weighted label distance
    const LabelMatrix oh = st::one_hot(hard, 8);
    double expected = 0.0;
    for (std::size_t e = 0; e < m.num_edges(); ++e) {
      const Edge& ed = m.edges()[e];
      expected += g.edgeLengths[static_cast<Eigen::Index>(e)] *
                  labels.pairwise_distances()(hard[static_cast<std::size_t>(ed.plus)],
                                              hard[static_cast<std::size_t>(ed.minus)]);
    }
    const double tl = tv_label(oh, labels, m, g);
    EXPECT_NEAR(tl, expected, 1e-10);
    EXPECT_LE(tl, kPi * totalLength);
  }
}

TEST(Objectives, FidelityOnlyAtZeroBeta) {
  const Fixture f = st::sphere_fixture(1);
  const LabelMatrix oh = atv::one_hot_argmin(f.s);
  double expected = 0.0;
  for (Eigen::Index t = 0; t < f.s.rows(); ++t) expected += f.geom.areas[t] * f.s.row(t).minCoeff();
  EXPECT_NEAR(objective_atv(oh, f.s, 0.0, f.mesh, f.geom), expected, 1e-12);
  EXPECT_NEAR(objective_ltv(oh, f.s, 0.0, f.labels, f.mesh, f.geom), expected, 1e-12);
  const LabelMatrix constant = st::one_hot(std::vector<int>(f.mesh.num_triangles(), 4), 22);
  EXPECT_NEAR(objective_atv(constant, f.s, 3.0, f.mesh, f.geom),
              objective_atv(constant, f.s, 0.0, f.mesh, f.geom), 1e-12);
  EXPECT_NEAR(objective_ltv(constant, f.s, 3.0, f.labels, f.mesh, f.geom),
              objective_ltv(constant, f.s, 0.0, f.labels, f.mesh, f.geom), 1e-12);
}

TEST(Objectives, ScoreOrNanOnlyAbsorbsNonConvergence) {
  EXPECT_EQ(score_or_nan([] { return 2.5; }), 2.5);
  EXPECT_TRUE(std::isnan(score_or_nan([]() -> double { throw ConvergenceError("budget"); })));
  EXPECT_THROW(score_or_nan([]() -> double { throw Error("input"); }), Error);
}

TEST(HardLabels, ArgmaxAndNearestWithLowestIndexTies) {
  LabelMatrix phi(3, 3);
  phi << 0, 1, 0, 0.5, 0.5, 0, 0.2, 0.3, 0.5;
  EXPECT_EQ(hard_labels_atv(phi), (HardLabeling{1, 0, 2}));
  const LabelSet g = equator_pole_labels(20);
  EXPECT_EQ(hard_labels_ltv({g[5], g[21]}, g), (HardLabeling{5, 21}));
  // the pole is exactly pi/2 from both labels
  const LabelSet xy(std::vector<Vec3>{Vec3(1, 0, 0), Vec3(0, 1, 0)});
  EXPECT_EQ(hard_labels_ltv({Vec3(0, 0, 1)}, xy), (HardLabeling{0}));
}

TEST(Correctness, Definition) {
  const Eigen::Vector4d areas(1, 2, 3, 4);
  const HardLabeling ref = {0, 1, 2, 3};
  EXPECT_EQ(correctness(ref, ref, areas), 1.0);
  EXPECT_EQ(correctness({1, 2, 3, 0}, ref, areas), 0.0);
  EXPECT_DOUBLE_EQ(correctness({0, 1, 0, 0}, ref, areas), 0.3);
  EXPECT_DOUBLE_EQ(correctness({9, 9, 2, 9}, {9, 8, 9, 9}, Eigen::Vector4d(1, 1, 1, 1)), 0.5);
  EXPECT_THROW(correctness({0}, ref, areas), Error);
}

TEST(Correctness, InvariantUnderCommonPermutation) {
  std::mt19937_64 rng(32);
  Eigen::VectorXd areas(50);
  HardLabeling a(50), b(50);
  for (int t = 0; t < 50; ++t) {
    areas[t] = 0.1 + static_cast<double>(rng() % 100);
    a[t] = static_cast<int>(rng() % 6);
    b[t] = static_cast<int>(rng() % 6);
  }
  std::vector<int> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  HardLabeling pa = a, pb = b;
  for (int t = 0; t < 50; ++t) pa[t] = perm[a[t]], pb[t] = perm[b[t]];
  EXPECT_DOUBLE_EQ(correctness(pa, pb, areas), correctness(a, b, areas));
}

TEST(LabelsUsed, CountsAndAreaThreshold) {
  const Eigen::VectorXd areas = Eigen::VectorXd::Constant(2000, 1.0);
  HardLabeling h(2000, 0);
  h[0] = 3;          // 0.05% of the area
  h[1] = h[2] = 5;   // 0.1%
  const LabelUsage u = labels_used(h, areas);
  EXPECT_EQ(u.any, 3);
  EXPECT_EQ(u.byArea, 2);
}

TEST(Sweep, DefaultGrid) {
  const auto g = default_beta_grid(0.1);
  ASSERT_EQ(g.size(), 7u);
  EXPECT_DOUBLE_EQ(g.front(), 0.0125);
  EXPECT_DOUBLE_EQ(g[3], 0.1);
  EXPECT_DOUBLE_EQ(g.back(), 0.8);
}

TEST(Sweep, SingleRowAndCleanReference) {
  const Fixture clean = make_fixture(icosphere(2), equator_pole_labels(20), 0.0, 1);
  const SweepReport r = beta_sweep(Model::Atv, {0.0}, clean, {});
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.best_beta(), 0.0);
  EXPECT_EQ(r.rows[0].correctness, 1.0);
}

TEST(Sweep, OrderingBestRowConcurrencyAndCsv) {
  const Fixture f = st::sphere_fixture(2);
  const SweepReport r1 = beta_sweep(Model::Atv, {0.08, 0.005, 0.02}, f, {}, 1);
  const SweepReport r3 = beta_sweep(Model::Atv, {0.08, 0.005, 0.02}, f, {}, 3);
  ASSERT_EQ(r1.rows.size(), 3u);
  EXPECT_TRUE(r1.rows[0].beta < r1.rows[1].beta && r1.rows[1].beta < r1.rows[2].beta);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r1.rows[i].correctness, r3.rows[i].correctness);
    EXPECT_EQ(r1.rows[i].objective, r3.rows[i].objective);
    EXPECT_LE(r1.rows[i].correctness, r1.rows[r1.best_index()].correctness);
  }
  std::ostringstream os;
  write_sweep_csv(os, r1);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "beta,correctness,labels_used,objective,iterations,runtime_s,labels_used_area");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_THROW(beta_sweep(Model::Atv, {}, f, {}), Error);
  EXPECT_THROW(beta_sweep(Model::Atv, {0.1, 0.1}, f, {}), Error);
  EXPECT_THROW(beta_sweep(Model::Atv, {-0.1}, f, {}), Error);
}

TEST(Sweep, SolverFailureIsRecordedNotFatal) {
  const Fixture f = st::sphere_fixture(1);
  SolverSettings s;
  s.ltv.karcher.maxIters = 0;  // the initial Karcher means cannot converge
  const SweepReport r = beta_sweep(Model::Ltv, {0.1, 0.2}, f, s);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const SweepRow& row : r.rows) {
    ASSERT_TRUE(row.error.has_value());
    EXPECT_TRUE(std::isnan(row.correctness));
  }
  EXPECT_THROW(r.best_index(), Error);
}
