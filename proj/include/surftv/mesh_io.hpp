#pragma once

// ASCII OFF / OBJ / PLY readers and OFF / PLY writers.

#include "surftv/mesh.hpp"

#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace surftv::io {

enum class MeshFormat { Off, Obj, Ply };

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] inline void parse_error(const std::string& what) {
  throw MeshError("parse failure: " + what);
}

[[noreturn]] inline void non_triangle(std::size_t face, std::size_t n) {
  std::ostringstream os;
  os << "non-triangle face " << face << " with " << n << " vertices";
  throw MeshError(os.str());
}

// Next line that is neither empty nor a '#' comment.
inline bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    return true;
  }
  return false;
}

}  // namespace detail

inline TriangleMesh read_off(std::istream& in) {
  std::string line;
  if (!detail::next_content_line(in, line)) detail::parse_error("empty OFF file");
  std::istringstream hs(line);
  std::string magic;
  hs >> magic;
  if (magic != "OFF") detail::parse_error("missing OFF header");
  std::size_t nv = 0, nf = 0, ne = 0;
  if (!(hs >> nv)) {
    if (!detail::next_content_line(in, line)) detail::parse_error("missing OFF counts");
    hs = std::istringstream(line);
    if (!(hs >> nv)) detail::parse_error("bad OFF counts");
  }
  if (!(hs >> nf >> ne)) detail::parse_error("bad OFF counts");
  std::vector<Vec3> verts(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!detail::next_content_line(in, line)) detail::parse_error("truncated vertex list");
    std::istringstream ls(line);
    if (!(ls >> verts[i][0] >> verts[i][1] >> verts[i][2]))
      detail::parse_error("bad vertex record");
  }
  std::vector<TriangleMesh::Triangle> tris(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    if (!detail::next_content_line(in, line)) detail::parse_error("truncated face list");
    std::istringstream ls(line);
    std::size_t n = 0;
    if (!(ls >> n)) detail::parse_error("bad face record");
    if (n != 3) detail::non_triangle(f, n);
    if (!(ls >> tris[f][0] >> tris[f][1] >> tris[f][2]))
      detail::parse_error("bad face record");
  }
  return TriangleMesh(std::move(verts), std::move(tris));
}

/// Reads `v` and `f` records; other records are ignored. Face tokens may
/// carry texture/normal suffixes (`v/vt/vn`) and negative indices.
inline TriangleMesh read_obj(std::istream& in) {
  std::vector<Vec3> verts;
  std::vector<TriangleMesh::Triangle> tris;
  std::string line;
  while (detail::next_content_line(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p[0] >> p[1] >> p[2])) detail::parse_error("bad vertex record");
      verts.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        int i = 0;
        try {
          i = std::stoi(head);
        } catch (const std::exception&) {
          detail::parse_error("bad face index '" + tok + "'");
        }
        if (i < 0) i = static_cast<int>(verts.size()) + i + 1;
        idx.push_back(i - 1);
      }
      if (idx.size() != 3) detail::non_triangle(tris.size(), idx.size());
      tris.push_back({idx[0], idx[1], idx[2]});
    }
  }
  return TriangleMesh(std::move(verts), std::move(tris));
}

/// ASCII PLY 1.0 with a `vertex` element (x, y, z among its scalar
/// properties) and a `face` element with one list property.
inline TriangleMesh read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::lower(line).rfind("ply", 0) != 0)
    detail::parse_error("missing ply magic");
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> props;  // names; lists get "list:" prefix
  };
  std::vector<Element> elements;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") detail::parse_error("only ascii PLY is supported");
      ascii = true;
    } else if (kw == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) detail::parse_error("property before element");
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it, name;
        ls >> ct >> it >> name;
        elements.back().props.push_back("list:" + name);
      } else {
        std::string name;
        ls >> name;
        elements.back().props.push_back(name);
      }
    } else if (kw == "end_header") {
      break;
    }
  }
  if (!ascii) detail::parse_error("missing format line");
  std::vector<Vec3> verts;
  std::vector<TriangleMesh::Triangle> tris;
  for (const Element& el : elements) {
    if (el.name == "vertex") {
      std::array<int, 3> col{-1, -1, -1};
      for (std::size_t i = 0; i < el.props.size(); ++i) {
        if (el.props[i] == "x") col[0] = static_cast<int>(i);
        if (el.props[i] == "y") col[1] = static_cast<int>(i);
        if (el.props[i] == "z") col[2] = static_cast<int>(i);
      }
      if (col[0] < 0 || col[1] < 0 || col[2] < 0)
        detail::parse_error("vertex element lacks x/y/z");
      verts.resize(el.count);
      for (std::size_t r = 0; r < el.count; ++r) {
        if (!std::getline(in, line)) detail::parse_error("truncated vertex list");
        std::istringstream ls(line);
        std::vector<double> vals(el.props.size());
        for (double& x : vals)
          if (!(ls >> x)) detail::parse_error("bad vertex record");
        verts[r] = Vec3(vals[col[0]], vals[col[1]], vals[col[2]]);
      }
    } else if (el.name == "face") {
      tris.resize(el.count);
      for (std::size_t r = 0; r < el.count; ++r) {
        if (!std::getline(in, line)) detail::parse_error("truncated face list");
        std::istringstream ls(line);
        bool got = false;
        for (const std::string& p : el.props) {
          if (p.rfind("list:", 0) == 0 && !got) {
            std::size_t n = 0;
            if (!(ls >> n)) detail::parse_error("bad face record");
            if (n != 3) detail::non_triangle(r, n);
            if (!(ls >> tris[r][0] >> tris[r][1] >> tris[r][2]))
              detail::parse_error("bad face record");
            got = true;
          } else if (p.rfind("list:", 0) == 0) {
            std::size_t n = 0;
            ls >> n;
            for (std::size_t k = 0; k < n; ++k) {
              double skip;
              ls >> skip;
            }
          } else {
            double skip;
            ls >> skip;
          }
        }
        if (!got) detail::parse_error("face element without index list");
      }
    } else {
      for (std::size_t r = 0; r < el.count; ++r)
        if (!std::getline(in, line)) detail::parse_error("truncated element");
    }
  }
  return TriangleMesh(std::move(verts), std::move(tris));
}

inline std::optional<MeshFormat> format_from_path(const std::filesystem::path& p) {
  const std::string ext = detail::lower(p.extension().string());
  if (ext == ".off") return MeshFormat::Off;
  if (ext == ".obj") return MeshFormat::Obj;
  if (ext == ".ply") return MeshFormat::Ply;
  return std::nullopt;
}

inline TriangleMesh load_mesh(const std::filesystem::path& path,
                              std::optional<MeshFormat> format = std::nullopt) {
  if (!format) format = format_from_path(path);
  if (!format) throw MeshError("unknown mesh format for " + path.string());
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open " + path.string());
  switch (*format) {
    case MeshFormat::Off: return read_off(in);
    case MeshFormat::Obj: return read_obj(in);
    case MeshFormat::Ply: return read_ply(in);
  }
  throw MeshError("unreachable mesh format");
}

inline void write_off(std::ostream& out, const TriangleMesh& mesh) {
  out.precision(17);
  out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_triangles() << ' '
      << mesh.num_edges() << '\n';
  for (const Vec3& v : mesh.vertices())
    out << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  for (const auto& t : mesh.triangles())
    out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

using Rgb = std::array<unsigned char, 3>;

/// ASCII PLY; when faceColors is non-empty it must hold one color per
/// triangle and is written as uchar red/green/blue face properties.
inline void write_ply(std::ostream& out, const TriangleMesh& mesh,
                      const std::vector<Rgb>& faceColors = {}) {
  const bool colored = !faceColors.empty();
  if (colored && faceColors.size() != mesh.num_triangles())
    throw Error("write_ply: one color per triangle required");
  out.precision(17);
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << mesh.num_vertices() << '\n'
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.num_triangles() << '\n'
      << "property list uchar int vertex_indices\n";
  if (colored)
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (const Vec3& v : mesh.vertices())
    out << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    out << "3 " << tri[0] << ' ' << tri[1] << ' ' << tri[2];
    if (colored)
      out << ' ' << int(faceColors[t][0]) << ' ' << int(faceColors[t][1]) << ' '
          << int(faceColors[t][2]);
    out << '\n';
  }
}

}  // namespace surftv::io
