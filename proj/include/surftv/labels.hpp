#pragma once

// Label sets on S^2 and the per-triangle fidelity (similarity) field.

#include "surftv/sphere.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace surftv {

/// L unit label directions plus their pairwise geodesic distances.
class LabelSet {
 public:
  LabelSet() = default;

  /// Directions are renormalized on construction.
  explicit LabelSet(std::vector<Vec3> directions) : labels_(std::move(directions)) {
    for (Vec3& g : labels_) {
      const double n = g.norm();
      if (!(n > 0.0)) throw Error("LabelSet: zero label direction");
      g /= n;
    }
    const auto n = static_cast<Eigen::Index>(labels_.size());
    pairwise_.setZero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        pairwise_(i, j) = pairwise_(j, i) = sphere::distance(labels_[i], labels_[j]);
  }

  std::size_t size() const { return labels_.size(); }
  const Vec3& operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<Vec3>& directions() const { return labels_; }
  const Eigen::MatrixXd& pairwise_distances() const { return pairwise_; }

 private:
  std::vector<Vec3> labels_;
  Eigen::MatrixXd pairwise_;
};

/// nEquator labels equally spaced on the equator,
/// (sin(2 pi l / n), cos(2 pi l / n), 0) for l = 1..n, followed by the north
/// and south poles.
inline LabelSet equator_pole_labels(int nEquator) {
  if (nEquator < 2) throw Error("equator_pole_labels: need at least 2 equator labels");
  std::vector<Vec3> g;
  g.reserve(static_cast<std::size_t>(nEquator) + 2);
  for (int l = 1; l <= nEquator; ++l) {
    const double a = 2.0 * kPi * l / nEquator;
    g.emplace_back(std::sin(a), std::cos(a), 0.0);
  }
  g.emplace_back(0.0, 0.0, 1.0);
  g.emplace_back(0.0, 0.0, -1.0);
  return LabelSet(std::move(g));
}

/// Spherical Fibonacci lattice in the offset form z_i = 1 - (2i+1)/L,
/// azimuth 2 pi i / golden^2.
inline LabelSet fibonacci_labels(int count) {
  if (count < 1) throw Error("fibonacci_labels: need at least one label");
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> g;
  g.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double az = 2.0 * kPi * i / (golden * golden);
    g.emplace_back(r * std::cos(az), r * std::sin(az), z);
  }
  return LabelSet(std::move(g));
}

/// Rows `x,y,z`; a non-numeric first line is treated as a header. Rows whose
/// norm differs from 1 by more than 1e-3 are rejected.
inline LabelSet read_label_csv(std::istream& in) {
  std::vector<Vec3> g;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p[0] >> p[1] >> p[2])) {
      if (row == 1) continue;
      throw Error("label csv: bad row " + std::to_string(row));
    }
    if (std::abs(p.norm() - 1.0) > 1e-3)
      throw Error("label csv: row " + std::to_string(row) + " is not a unit vector");
    g.push_back(p);
  }
  if (g.empty()) throw Error("label csv: no labels");
  return LabelSet(std::move(g));
}

inline LabelSet load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open label file " + path.string());
  return read_label_csv(in);
}

inline void write_label_csv(std::ostream& out, const LabelSet& labels) {
  out.precision(17);
  for (const Vec3& g : labels.directions())
    out << g[0] << ',' << g[1] << ',' << g[2] << '\n';
}

/// s(T, l) = d(n_T, g_l), the geodesic distance between the triangle normal
/// and each label.
inline LabelMatrix similarity_field(const std::vector<Vec3>& normals,
                                    const LabelSet& labels) {
  LabelMatrix s(static_cast<Eigen::Index>(normals.size()),
                static_cast<Eigen::Index>(labels.size()));
  for (std::size_t t = 0; t < normals.size(); ++t)
    for (std::size_t l = 0; l < labels.size(); ++l)
      s(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) =
          sphere::distance(normals[t], labels[l]);
  return s;
}

}  // namespace surftv
