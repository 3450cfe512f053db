#pragma once

// Fixtures and brute-force oracles shared by the unit and acceptance tests.
// The oracles deliberately avoid the library's own algorithms.

#include "surftv/surftv.hpp"

#include <array>
#include <random>

namespace surftv::testing {

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

inline Vec3 random_tangent(std::mt19937_64& rng, const Vec3& base, double maxNorm) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, maxNorm);
  const Vec3 v = sphere::project_tangent(base, Vec3(n(rng), n(rng), n(rng)));
  return u(rng) * v.normalized();
}

inline Eigen::VectorXd random_simplex_point(std::mt19937_64& rng, Eigen::Index L) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd p(L);
  for (Eigen::Index i = 0; i < L; ++i) p[i] = e(rng);
  return p / p.sum();
}

/// Two triangles glued along all three edges (a closed "pillow").
inline TriangleMesh pillow() {
  return TriangleMesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}, {0, 2, 1}});
}

/// Regular tetrahedron, outward oriented.
inline TriangleMesh tetrahedron() {
  return TriangleMesh({Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)},
                      {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}});
}

/// Closed triangular prism with pyramid caps. The two rings are equilateral
/// triangles of perimeter 1 (edges of length 1/3) at z = 0 and z = h.
/// Triangles 0-2 form the top cap, 3-8 the side band, 9-11 the bottom cap.
inline TriangleMesh capped_prism(double h = 0.5) {
  const double r = (1.0 / 3.0) / std::sqrt(3.0);
  std::vector<Vec3> v;
  for (int ring = 0; ring < 2; ++ring)
    for (int k = 0; k < 3; ++k) {
      const double a = 2.0 * kPi * k / 3.0;
      v.emplace_back(r * std::cos(a), r * std::sin(a), ring == 0 ? h : 0.0);
    }
  v.emplace_back(0, 0, h + 0.3);  // 6: top apex
  v.emplace_back(0, 0, -0.3);     // 7: bottom apex
  std::vector<TriangleMesh::Triangle> t = {
      {6, 0, 1}, {6, 1, 2}, {6, 2, 0},                           // top cap
      {0, 3, 4}, {0, 4, 1}, {1, 4, 5}, {1, 5, 2}, {2, 5, 3}, {2, 3, 0},  // band
      {7, 4, 3}, {7, 5, 4}, {7, 3, 5}};                          // bottom cap
  return TriangleMesh(std::move(v), std::move(t));
}

/// One-hot assignment field with the given label per triangle.
inline LabelMatrix one_hot(const std::vector<int>& labels, Eigen::Index L) {
  LabelMatrix phi = LabelMatrix::Zero(static_cast<Eigen::Index>(labels.size()), L);
  for (std::size_t t = 0; t < labels.size(); ++t) phi(static_cast<Eigen::Index>(t), labels[t]) = 1.0;
  return phi;
}

/// Euclidean projection onto the simplex by enumerating every support S:
/// the projection onto the affine hull of the face is v_S + (1 - sum v_S)/|S|;
/// the nearest feasible candidate wins.
inline Eigen::VectorXd brute_force_simplex_projection(const Eigen::VectorXd& v) {
  const auto L = static_cast<int>(v.size());
  Eigen::VectorXd best;
  double bestDist = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << L); ++mask) {
    double sum = 0.0;
    int n = 0;
    for (int i = 0; i < L; ++i)
      if (mask & (1 << i)) sum += v[i], ++n;
    const double shift = (1.0 - sum) / n;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(L);
    bool feasible = true;
    for (int i = 0; i < L; ++i)
      if (mask & (1 << i)) {
        x[i] = v[i] + shift;
        feasible = feasible && x[i] >= -1e-15;
      }
    if (!feasible) continue;
    const double d = (x - v).squaredNorm();
    if (d < bestDist) bestDist = d, best = x;
  }
  return best;
}

/// Minimum of phi^T s + rho/2 |Y^T phi + mu|^2 over the simplex by support
/// enumeration. On each face the stationarity system is solved in the least
/// squares sense (complete orthogonal decomposition), so singular faces are
/// handled; a minimizer of a singular face that leaves the face is found on
/// a smaller face.
inline double brute_force_qp_minimum(const qp::Problem& p, Eigen::VectorXd* argmin = nullptr) {
  const auto L = static_cast<int>(p.s.size());
  const Eigen::MatrixXd H = p.rho * p.Y * p.Y.transpose();
  const Eigen::VectorXd lin = p.s + p.rho * p.Y * p.mu;
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << L); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < L; ++i)
      if (mask & (1 << i)) idx.push_back(i);
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Eigen::VectorXd b(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) A(i, j) = H(idx[i], idx[j]);
      A(i, n) = 1.0;
      A(n, i) = 1.0;
      b[i] = -lin[idx[i]];
    }
    b[n] = 1.0;
    const Eigen::VectorXd sol = A.completeOrthogonalDecomposition().solve(b);
    if ((A * sol - b).norm() > 1e-9 * (1.0 + b.norm())) continue;
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(L);
    for (Eigen::Index i = 0; i < n; ++i) phi[idx[i]] = sol[i];
    if (phi.minCoeff() < -1e-12) continue;
    const double f = p.objective(phi);
    if (f < best) {
      best = f;
      if (argmin) *argmin = phi;
    }
  }
  return best;
}

/// Random QP instance: Y rows tangent-like vectors of norm <= 2, s in [0, pi].
inline qp::Problem random_qp(std::mt19937_64& rng, Eigen::Index L, double rho) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> us(0.0, kPi);
  qp::Problem p;
  p.rho = rho;
  p.s.resize(L);
  p.Y.resize(L, 3);
  for (Eigen::Index l = 0; l < L; ++l) {
    p.s[l] = us(rng);
    p.Y.row(l) = Vec3(u(rng), u(rng), u(rng)).transpose();
  }
  p.mu = Vec3(u(rng), u(rng), u(rng));
  return p;
}

/// Noisy icosphere fixture with the 22-label equator+poles set.
inline Fixture sphere_fixture(int sub, std::uint64_t seed = 1, double c = 0.04) {
  return make_fixture(icosphere(sub), equator_pole_labels(20), c, seed);
}

// Random state with every tangent quantity at its base point. Centers stay
// within 1 rad of a common direction so no edge is near antipodal.
inline ltv::State random_state(std::mt19937_64& rng, const ltv::Problem& p) {
  const std::size_t nT = p.mesh.num_triangles(), L = p.num_labels(), nE = p.mesh.num_edges();
  ltv::State s;
  s.rho = 2.0;
  s.beta = 0.3;
  s.phi.resize(static_cast<Eigen::Index>(nT), static_cast<Eigen::Index>(L));
  const Vec3 c = random_unit(rng);
  std::normal_distribution<double> n(0.0, 0.2);
  for (std::size_t t = 0; t < nT; ++t) {
    s.phi.row(static_cast<Eigen::Index>(t)) =
        random_simplex_point(rng, static_cast<Eigen::Index>(L)).transpose();
    s.m.push_back(sphere::exp(c, random_tangent(rng, c, 1.0)));
    s.mu.push_back(random_tangent(rng, s.m.back(), 0.3));
    for (std::size_t l = 0; l < L; ++l) {
      s.Y.push_back(random_tangent(rng, s.m.back(), 1.5));
      s.nu.emplace_back(n(rng), n(rng), n(rng));
    }
  }
  for (std::size_t e = 0; e < nE; ++e) {
    const Vec3& base = s.m[p.mesh.edges()[e].plus];
    s.X.push_back(random_tangent(rng, base, 1.0));
    s.xi.push_back(random_tangent(rng, base, 0.3));
  }
  return s;
}

// Orthonormal basis of the tangent plane at m.
inline std::array<Vec3, 2> tangent_basis(const Vec3& m) {
  Eigen::Index axis = 0;
  m.cwiseAbs().minCoeff(&axis);
  const Vec3 u = sphere::project_tangent(m, Vec3::Unit(axis)).normalized();
  return {u, m.cross(u)};
}

}  // namespace surftv::testing
