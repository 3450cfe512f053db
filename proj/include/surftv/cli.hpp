#pragma once

// Command-line front end. Everything here is callable from tests; the
// executable in tools/ only forwards argv to run().

#include "surftv/mesh_io.hpp"
#include "surftv/sweep.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace surftv::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using io::Rgb;
using io::load_mesh;
using io::write_off;
using io::write_ply;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;

struct RunConfig {
  std::string mesh;                    // file path or icosphere:N
  std::string labels = "equator:20";   // CSV path, equator:N or fibonacci:N
  std::string model = "ltv";
  double beta = 0.25;
  double rho = 1.0;
  double noiseVarFactor = 0.04;
  std::uint64_t seed = 1;
  int maxIters = 0;  // 0: model default
  double tol = 0.0;  // 0: model default
  std::string out = ".";
  int jobs = 1;
  std::vector<double> grid;  // sweep only; empty: default grid around beta
};

inline json to_json(const RunConfig& c) {
  return json{{"mesh", c.mesh},   {"labels", c.labels},
              {"model", c.model}, {"beta", c.beta},
              {"rho", c.rho},     {"noise_var_factor", c.noiseVarFactor},
              {"seed", c.seed},   {"max_iters", c.maxIters},
              {"tol", c.tol},     {"out", c.out},
              {"jobs", c.jobs},   {"grid", c.grid}};
}

namespace detail {

// "name:N" -> N, or nullopt when the prefix does not match.
inline std::optional<int> spec_param(const std::string& spec, const std::string& name) {
  const std::string prefix = name + ":";
  if (spec.rfind(prefix, 0) != 0) return std::nullopt;
  try {
    std::size_t used = 0;
    const int n = std::stoi(spec.substr(prefix.size()), &used);
    if (used == spec.size() - prefix.size()) return n;
  } catch (const std::exception&) {
  }
  throw Error("malformed generator spec '" + spec + "'");
}

template <class F>
void write_file(const fs::path& path, F&& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  body(out);
  if (!out) throw Error("write failed for " + path.string());
}

inline std::vector<std::vector<double>> read_numeric_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.find_first_of("abcdefghijklmnopqrstuvwxyz_") != std::string::npos) {
      first = false;
      continue;
    }
    first = false;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error("non-numeric cell '" + cell + "' in " + path.string());
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline TriangleMesh resolve_mesh(const std::string& spec) {
  if (spec.empty()) throw Error("no mesh given");
  if (const auto n = detail::spec_param(spec, "icosphere")) return icosphere(*n);
  return load_mesh(spec);
}

inline LabelSet resolve_labels(const std::string& spec) {
  if (const auto n = detail::spec_param(spec, "equator")) return equator_pole_labels(*n);
  if (const auto n = detail::spec_param(spec, "fibonacci")) return fibonacci_labels(*n);
  return load_labels(spec);
}

/// Distinct color per label: hue advances by the golden angle.
inline Rgb label_color(int label) {
  const double h = std::fmod(137.50776405003785 * label, 360.0) / 60.0;
  const double s = 0.65, v = 0.95;
  const double c = v * s;
  const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const auto q = [&](double u) {
    return static_cast<unsigned char>(std::lround(255.0 * (u + v - c)));
  };
  return {q(r), q(g), q(b)};
}

inline void write_assignment_csv(std::ostream& out, const LabelMatrix& phi) {
  out << "triangle";
  for (Eigen::Index l = 0; l < phi.cols(); ++l) out << ",phi_" << l;
  out << '\n';
  out.precision(17);
  for (Eigen::Index t = 0; t < phi.rows(); ++t) {
    out << t;
    for (Eigen::Index l = 0; l < phi.cols(); ++l) out << ',' << phi(t, l);
    out << '\n';
  }
}

inline void write_hard_labels_csv(std::ostream& out, const HardLabeling& labels) {
  out << "triangle,label\n";
  for (std::size_t t = 0; t < labels.size(); ++t) out << t << ',' << labels[t] << '\n';
}

inline void write_centers_csv(std::ostream& out, const std::vector<Vec3>& m) {
  out << "triangle,x,y,z\n";
  out.precision(17);
  for (std::size_t t = 0; t < m.size(); ++t)
    out << t << ',' << m[t][0] << ',' << m[t][1] << ',' << m[t][2] << '\n';
}

inline void write_atv_diagnostics_csv(std::ostream& out, const std::vector<AtvRecord>& rows) {
  out << "k,objective,change\n";
  out.precision(10);
  for (const AtvRecord& r : rows) out << r.k << ',' << r.objective << ',' << r.change << '\n';
}

inline LabelMatrix read_assignment_csv(const fs::path& path, std::size_t triangles,
                                       std::size_t labels) {
  const auto rows = detail::read_numeric_csv(path);
  if (rows.size() != triangles) throw Error("assignment: expected one row per triangle");
  LabelMatrix phi(static_cast<Eigen::Index>(triangles), static_cast<Eigen::Index>(labels));
  for (std::size_t t = 0; t < triangles; ++t) {
    if (rows[t].size() != labels + 1) throw Error("assignment: expected triangle index and L values");
    for (std::size_t l = 0; l < labels; ++l)
      phi(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) = rows[t][l + 1];
  }
  return phi;
}

inline std::vector<Vec3> read_centers_csv(const fs::path& path, std::size_t triangles) {
  const auto rows = detail::read_numeric_csv(path);
  if (rows.size() != triangles) throw Error("centers: expected one row per triangle");
  std::vector<Vec3> m(triangles);
  for (std::size_t t = 0; t < triangles; ++t) {
    if (rows[t].size() != 4) throw Error("centers: expected triangle,x,y,z");
    m[t] = Vec3(rows[t][1], rows[t][2], rows[t][3]).normalized();
  }
  return m;
}

inline SolverSettings settings_from(const RunConfig& c) {
  SolverSettings s;
  s.ltv.rho = c.rho;
  if (c.maxIters > 0) s.atvMaxIters = s.ltv.maxIters = c.maxIters;
  if (c.tol > 0.0) s.atvTol = s.ltv.primalTol = c.tol;
  return s;
}

inline Fixture fixture_from(const RunConfig& c) {
  return make_fixture(resolve_mesh(c.mesh), resolve_labels(c.labels), c.noiseVarFactor, c.seed);
}

inline int cmd_generate_icosphere(int sub, double radius, const fs::path& out) {
  detail::write_file(out, [&](std::ostream& os) { write_off(os, icosphere(sub, radius)); });
  return kExitOk;
}

inline int cmd_generate_labels(const LabelSet& labels, const fs::path& out) {
  detail::write_file(out, [&](std::ostream& os) { write_label_csv(os, labels); });
  return kExitOk;
}

/// Writes the noisy mesh as OFF to `out`.
inline int cmd_noise(const RunConfig& c) {
  const TriangleMesh noisy = add_vertex_noise(resolve_mesh(c.mesh), c.noiseVarFactor, c.seed);
  detail::write_file(c.out, [&](std::ostream& os) { write_off(os, noisy); });
  return kExitOk;
}

/// Segments the (noised) mesh and writes assignment.csv, labels.csv,
/// centers.csv (ltv), segmentation.ply, diagnostics.csv and summary.json
/// into c.out. Returns kExitNotConverged when the solver hit its budget.
inline int cmd_segment(const RunConfig& c, std::ostream& log) {
  const Model model = parse_model(c.model);
  const Fixture f = fixture_from(c);
  SolverSettings settings = settings_from(c);
  settings.atvTrace = true;
  const Segmentation seg = segment(model, f, c.beta, settings);
  const fs::path dir(c.out);
  fs::create_directories(dir);

  detail::write_file(dir / "assignment.csv",
                     [&](std::ostream& os) { write_assignment_csv(os, seg.phi); });
  detail::write_file(dir / "labels.csv",
                     [&](std::ostream& os) { write_hard_labels_csv(os, seg.hard); });
  if (model == Model::Ltv)
    detail::write_file(dir / "centers.csv", [&](std::ostream& os) { write_centers_csv(os, seg.m); });
  std::vector<Rgb> colors;
  for (int l : seg.hard) colors.push_back(label_color(l));
  detail::write_file(dir / "segmentation.ply",
                     [&](std::ostream& os) { write_ply(os, f.mesh, colors); });
  detail::write_file(dir / "diagnostics.csv", [&](std::ostream& os) {
    if (model == Model::Ltv)
      ltv::write_diagnostics_csv(os, seg.history);
    else
      write_atv_diagnostics_csv(os, seg.atvTrace);
  });

  const SweepRow row = score(seg, f);
  json summary{{"config", to_json(c)},
               {"objective", seg.objective},
               {"tv", model == Model::Atv ? tv_assignment(seg.phi, f.mesh, f.geom)
                                          : score_or_nan([&] {
                                            return tv_label(seg.phi, f.labels, f.mesh, f.geom);
                                          })},
               {"correctness", row.correctness},
               {"labels_used", row.labelsUsed},
               {"labels_used_area", row.labelsUsedByArea},
               {"iterations", seg.iterations},
               {"converged", seg.converged},
               {"runtime_s", seg.runtimeSeconds},
               {"tolerances",
                {{"atv_primal", settings.atvTol},
                 {"ltv_primal", settings.ltv.primalTol},
                 {"ltv_change", settings.ltv.changeTol}}}};
  if (model == Model::Ltv) {
    summary["max_tangency"] = seg.maxTangency;
    if (!seg.history.empty()) {
      const auto& r = seg.history.back().residuals;
      summary["residuals"] = {{"karcher", r.karcher}, {"label", r.label}, {"edge", r.edge}};
    }
  }
  detail::write_file(dir / "summary.json", [&](std::ostream& os) { os << summary.dump(2) << '\n'; });

  log << model_name(model) << " beta=" << c.beta << " correctness=" << row.correctness
      << " labels_used=" << row.labelsUsed << " iterations=" << seg.iterations
      << (seg.converged ? "" : " (not converged)") << '\n';
  return seg.converged ? kExitOk : kExitNotConverged;
}

/// Runs beta_sweep and writes sweep.csv plus sweep.json into c.out.
inline int cmd_sweep(const RunConfig& c, std::ostream& log) {
  const Model model = parse_model(c.model);
  const Fixture f = fixture_from(c);
  const std::vector<double> grid = c.grid.empty() ? default_beta_grid(c.beta) : c.grid;
  const SweepReport rep = beta_sweep(model, grid, f, settings_from(c), c.jobs);
  const fs::path dir(c.out);
  fs::create_directories(dir);
  detail::write_file(dir / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, rep); });

  bool clean = true;
  json rows = json::array();
  for (const SweepRow& r : rep.rows) {
    json j{{"beta", r.beta}, {"converged", r.converged}};
    if (r.error) {
      j["error"] = *r.error;
      log << "beta=" << r.beta << " failed: " << *r.error << '\n';
    }
    clean = clean && !r.error && r.converged;
    rows.push_back(j);
  }
  const double best = rep.best_beta();
  detail::write_file(dir / "sweep.json", [&](std::ostream& os) {
    os << json{{"config", to_json(c)}, {"best_beta", best}, {"rows", rows}}.dump(2) << '\n';
  });
  log << model_name(model) << " beta*=" << best
      << " correctness=" << rep.rows[rep.best_index()].correctness << '\n';
  return clean ? kExitOk : kExitNotConverged;
}

/// Scores a stored assignment (and, for L-TV, stored centers) on the fixture
/// described by c. Writes evaluation.json into c.out.
inline int cmd_evaluate(const RunConfig& c, const fs::path& assignment,
                        const std::optional<fs::path>& centers, std::ostream& log) {
  const Fixture f = fixture_from(c);
  const LabelMatrix phi = read_assignment_csv(assignment, f.mesh.num_triangles(), f.labels.size());
  const HardLabeling atvLabels = hard_labels_atv(phi);
  json j{{"config", to_json(c)},
         {"tv_assignment", tv_assignment(phi, f.mesh, f.geom)},
         {"tv_label", score_or_nan([&] { return tv_label(phi, f.labels, f.mesh, f.geom); })},
         {"objective_atv", objective_atv(phi, f.s, c.beta, f.mesh, f.geom)},
         {"objective_ltv", score_or_nan([&] {
            return objective_ltv(phi, f.s, c.beta, f.labels, f.mesh, f.geom);
          })},
         {"correctness_argmax", correctness(atvLabels, f.reference, f.geom.areas)},
         {"labels_used_argmax", labels_used(atvLabels, f.geom.areas).any}};
  if (centers) {
    const HardLabeling nearest =
        hard_labels_ltv(read_centers_csv(*centers, f.mesh.num_triangles()), f.labels);
    j["correctness_nearest"] = correctness(nearest, f.reference, f.geom.areas);
    j["labels_used_nearest"] = labels_used(nearest, f.geom.areas).any;
  }
  const fs::path dir(c.out);
  fs::create_directories(dir);
  detail::write_file(dir / "evaluation.json", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  log << j.dump() << '\n';
  return kExitOk;
}

namespace detail {

inline void add_fixture_options(CLI::App* app, RunConfig& c) {
  app->add_option("--mesh", c.mesh, "mesh file (OFF/OBJ/PLY) or icosphere:N")->required();
  app->add_option("--labels", c.labels, "label CSV, equator:N or fibonacci:N")
      ->capture_default_str();
  app->add_option("--noise-var-factor", c.noiseVarFactor, "vertex noise variance factor")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app->add_option("--seed", c.seed, "noise seed")->capture_default_str();
  app->add_option("--out", c.out, "output directory")->capture_default_str();
}

inline void add_solver_options(CLI::App* app, RunConfig& c) {
  app->add_option("--model", c.model, "regularizer")
      ->capture_default_str()
      ->check(CLI::IsMember({"atv", "ltv"}));
  app->add_option("--beta", c.beta, "regularization weight")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app->add_option("--rho", c.rho, "ADMM penalty (ltv)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--max-iters", c.maxIters, "iteration budget (0: model default)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--tol", c.tol, "primal tolerance (0: model default)")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace detail

/// Parses argv and dispatches. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cerr) {
  CLI::App app{"Surface segmentation by normal labeling with total variation"};
  app.set_config("--config", "", "TOML/INI file with option defaults; flags override");
  app.require_subcommand(1);
  RunConfig c;

  auto* gen = app.add_subcommand("generate", "write a generated mesh or label set");
  gen->require_subcommand(1);
  int sub = 3, nEquator = 20, nFib = 50;
  double radius = 1.0;
  std::string genOut;
  auto* ico = gen->add_subcommand("icosphere", "subdivided icosahedron as OFF");
  ico->add_option("--sub", sub, "subdivision level")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  ico->add_option("--radius", radius, "sphere radius")->capture_default_str()->check(
      CLI::PositiveNumber);
  ico->add_option("--out", genOut, "output OFF path")->required();
  auto* eq = gen->add_subcommand("labels-equator", "n equator labels plus both poles");
  eq->add_option("--n", nEquator, "equator label count")->capture_default_str();
  eq->add_option("--out", genOut, "output CSV path")->required();
  auto* fib = gen->add_subcommand("labels-fibonacci", "Fibonacci lattice labels");
  fib->add_option("--L", nFib, "label count")->capture_default_str();
  fib->add_option("--out", genOut, "output CSV path")->required();

  auto* noise = app.add_subcommand("noise", "add Gaussian vertex noise and write OFF");
  noise->add_option("--mesh", c.mesh, "mesh file or icosphere:N")->required();
  noise->add_option("--noise-var-factor", c.noiseVarFactor, "variance factor")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  noise->add_option("--seed", c.seed, "noise seed")->capture_default_str();
  noise->add_option("--out", c.out, "output OFF path")->required();

  auto* seg = app.add_subcommand("segment", "solve one model at one beta");
  detail::add_fixture_options(seg, c);
  detail::add_solver_options(seg, c);

  auto* sweep = app.add_subcommand("sweep", "solve over a beta grid and report beta*");
  detail::add_fixture_options(sweep, c);
  detail::add_solver_options(sweep, c);
  sweep->add_option("--grid", c.grid, "beta values (default: beta * 2^-3..3)");
  sweep->add_option("--jobs", c.jobs, "concurrent rows")->capture_default_str()->check(
      CLI::PositiveNumber);

  auto* eval = app.add_subcommand("evaluate", "score a stored assignment");
  detail::add_fixture_options(eval, c);
  std::string assignment, centers;
  eval->add_option("--beta", c.beta, "weight for the objectives")->capture_default_str();
  eval->add_option("--assignment", assignment, "assignment CSV")->required();
  eval->add_option("--centers", centers, "centers CSV (nearest-label extraction)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream out, err;
    const int code = app.exit(e, out, err);
    log << out.str() << err.str();
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*ico) return cmd_generate_icosphere(sub, radius, genOut);
    if (*eq) return cmd_generate_labels(equator_pole_labels(nEquator), genOut);
    if (*fib) return cmd_generate_labels(fibonacci_labels(nFib), genOut);
    if (*noise) return cmd_noise(c);
    if (*seg) return cmd_segment(c, log);
    if (*sweep) return cmd_sweep(c, log);
    if (*eval)
      return cmd_evaluate(c, assignment,
                          centers.empty() ? std::nullopt : std::optional<fs::path>(centers), log);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace surftv::cli
