#pragma once

// Run configuration, field files, plot exports and run reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"

#include "spnodal/minimizer.hpp"

namespace spnodal {

/// Invalid configuration (the CLI maps it to exit code 65).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  struct Domain {
    std::string kind = "ball";  // ball (radial), box, ball3d (box-embedded ball mask)
    int n = 0;                  // 0 picks 255 for ball, 31 otherwise
    double extent = 1.0;        // ball radius or box side
  } domain;
  struct Nonlin {
    std::string form = "pure_power";
    double lambda = 1.0;
    double p = 5.0;
    double mu = 0.0;
    double q = 5.0;
  } nonlinearity;
  struct Solver {
    double cg_tol = kDefaultCgTolerance;
    double proj_tol = kDefaultProjectionTolerance;
    double grad_tol = 1e-6;
    int max_iter = 3000;
    std::uint64_t seed = 42;
    std::string init_style = "dipole";
    int multistart = 3;
  } solver;
  struct Output {
    std::string directory = "out";
    std::string field_format = "native";  // native, plot or both
  } output;

  int resolved_n() const { return domain.n > 0 ? domain.n : (domain.kind == "ball" ? 255 : 31); }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: '" + v + "'");
  }
  if (used != v.size()) throw ConfigError(key + ": not a number: '" + v + "'");
  return x;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not an integer: '" + v + "'");
  }
  if (used != v.size()) throw ConfigError(key + ": not an integer: '" + v + "'");
  return x;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Sets one flat key (the same names as the CLI flags).
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_int;
  if (key == "domain") c.domain.kind = value;
  else if (key == "n") c.domain.n = static_cast<int>(parse_int(key, value));
  else if (key == "extent") c.domain.extent = parse_double(key, value);
  else if (key == "form") c.nonlinearity.form = value;
  else if (key == "lambda") c.nonlinearity.lambda = parse_double(key, value);
  else if (key == "p") c.nonlinearity.p = parse_double(key, value);
  else if (key == "mu") c.nonlinearity.mu = parse_double(key, value);
  else if (key == "q") c.nonlinearity.q = parse_double(key, value);
  else if (key == "cg_tol") c.solver.cg_tol = parse_double(key, value);
  else if (key == "proj_tol") c.solver.proj_tol = parse_double(key, value);
  else if (key == "grad_tol") c.solver.grad_tol = parse_double(key, value);
  else if (key == "max_iter") c.solver.max_iter = static_cast<int>(parse_int(key, value));
  else if (key == "seed") {
    const long long s = parse_int(key, value);
    if (s < 0) throw ConfigError("seed must be nonnegative");
    c.solver.seed = static_cast<std::uint64_t>(s);
  } else if (key == "init") c.solver.init_style = value;
  else if (key == "multistart") c.solver.multistart = static_cast<int>(parse_int(key, value));
  else if (key == "out") c.output.directory = value;
  else if (key == "field_format") c.output.field_format = value;
  else throw ConfigError("unknown configuration key: " + key);
}

/// key = value lines; '#' starts a comment.
inline RunConfig parse_config(std::istream& in, RunConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  return parse_config(in, std::move(base));
}

inline void validate(const RunConfig& c) {
  const auto& d = c.domain;
  if (d.kind != "ball" && d.kind != "box" && d.kind != "ball3d")
    throw ConfigError("domain must be ball, box or ball3d");
  if (d.n != 0 && d.n < 3) throw ConfigError("n must be at least 3");
  if (!(d.extent > 0.0) || !std::isfinite(d.extent)) throw ConfigError("extent must be positive");
  const auto& nl = c.nonlinearity;
  if (nl.form != "pure_power" && nl.form != "two_power") throw ConfigError("form must be pure_power or two_power");
  if (!(nl.lambda > 0.0) || !std::isfinite(nl.lambda)) throw ConfigError("lambda must be positive");
  if (!(nl.p > 4.0 && nl.p < 6.0)) throw ConfigError("p must lie in (4, 6)");
  if (nl.form == "two_power") {
    if (!(nl.mu >= 0.0) || !std::isfinite(nl.mu)) throw ConfigError("mu must be nonnegative");
    if (!(nl.q > 4.0 && nl.q < 6.0)) throw ConfigError("q must lie in (4, 6)");
  }
  const auto& s = c.solver;
  for (auto [name, v] : {std::pair{"cg_tol", s.cg_tol}, {"proj_tol", s.proj_tol}, {"grad_tol", s.grad_tol}})
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string(name) + " must lie in (0, 1)");
  if (s.max_iter < 0) throw ConfigError("max_iter must be nonnegative");
  if (s.multistart < 1 || s.multistart > 4) throw ConfigError("multistart must be between 1 and 4");
  try {
    parse_init_style(s.init_style);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto& o = c.output;
  if (o.field_format != "native" && o.field_format != "plot" && o.field_format != "both")
    throw ConfigError("field_format must be native, plot or both");
  if (o.directory.empty()) throw ConfigError("output directory must be non-empty");
}

inline DomainPtr make_domain(const RunConfig& c) {
  const int n = c.resolved_n();
  if (c.domain.kind == "ball") return build_radial_grid(n, c.domain.extent);
  if (c.domain.kind == "ball3d") return build_ball_mask_grid(n, c.domain.extent);
  return build_box_grid(n, c.domain.extent);
}

inline PowerNonlinearity make_nonlinearity(const RunConfig& c) {
  const auto& nl = c.nonlinearity;
  if (nl.form == "two_power") return PowerNonlinearity::two(nl.lambda, nl.p, nl.mu, nl.q);
  return PowerNonlinearity::pure(nl.lambda, nl.p);
}

/// Start styles for a multi-start run: the configured one first.
inline std::vector<InitStyle> start_styles(const RunConfig& c) {
  std::vector<InitStyle> out{parse_init_style(c.solver.init_style)};
  for (auto s : {InitStyle::dipole, InitStyle::mode2, InitStyle::random_signed, InitStyle::radial2}) {
    if (static_cast<int>(out.size()) >= c.solver.multistart) break;
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  return out;
}

inline MinimizerOptions minimizer_options(const RunConfig& c) {
  MinimizerOptions o;
  o.tol_grad = c.solver.grad_tol;
  o.max_iter = c.solver.max_iter;
  o.proj_tol = c.solver.proj_tol;
  return o;
}

// ---- number formatting ----------------------------------------------------

/// Shortest-form-independent, round-trip decimal for doubles.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---- native field files ---------------------------------------------------

inline void write_field(std::ostream& out, const Field& u) {
  const auto& d = u.domain();
  out << "SPNODAL1\n";
  out << "kind " << to_string(d.kind) << "\n";
  out << "mask " << (d.ball_mask ? "ball" : "none") << "\n";
  out << "n " << d.n << "\n";
  out << "extent " << fmt17(d.extent) << "\n";
  out << "spacing " << fmt17(d.h) << "\n";
  out << "count " << u.size() << "\n";
  for (double v : u.values()) out << fmt17(v) << "\n";
}

inline void write_field(const std::string& path, const Field& u) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_field(out, u);
}

namespace detail {

inline std::string expect_key(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("field file truncated before '" + key + "'");
  const auto sp = line.find(' ');
  if (sp == std::string::npos || line.substr(0, sp) != key)
    throw std::runtime_error("field file: expected '" + key + "', got '" + line + "'");
  return line.substr(sp + 1);
}

inline DomainPtr rebuild_domain(const std::string& kind, const std::string& mask, int n, double extent) {
  if (kind == "radial_ball") return build_radial_grid(n, extent);
  if (kind == "box3d" && mask == "ball") return build_ball_mask_grid(n, extent / 2.0);
  if (kind == "box3d" && mask == "none") return build_box_grid(n, extent);
  throw std::runtime_error("unknown domain '" + kind + "' / mask '" + mask + "'");
}

inline void read_values(std::istream& in, std::vector<double>& v, std::size_t count, bool two_columns) {
  std::string line;
  v.clear();
  while (v.size() < count && std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    if (two_columns) ls >> tok;  // r column
    if (!(ls >> tok)) throw std::runtime_error("malformed value line: " + line);
    v.push_back(std::strtod(tok.c_str(), nullptr));
  }
  if (v.size() != count) throw std::runtime_error("field file holds fewer values than declared");
}

}  // namespace detail

inline Field read_field(std::istream& in) {
  std::string magic;
  std::getline(in, magic);
  if (magic != "SPNODAL1") throw std::runtime_error("not a field file (missing SPNODAL1 header)");
  const std::string kind = detail::expect_key(in, "kind");
  const std::string mask = detail::expect_key(in, "mask");
  const int n = std::stoi(detail::expect_key(in, "n"));
  const double extent = std::strtod(detail::expect_key(in, "extent").c_str(), nullptr);
  const double spacing = std::strtod(detail::expect_key(in, "spacing").c_str(), nullptr);
  const std::size_t count = std::stoull(detail::expect_key(in, "count"));
  auto d = detail::rebuild_domain(kind, mask, n, extent);
  if (d->node_count() != count) throw std::runtime_error("field file: count does not match the grid");
  if (std::abs(d->h - spacing) > 1e-12 * spacing) throw std::runtime_error("field file: spacing does not match");
  std::vector<double> v;
  detail::read_values(in, v, count, false);
  return Field(d, std::move(v));
}

inline Field read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return read_field(in);
}

// ---- plot exports ---------------------------------------------------------

/// Legacy VTK structured points for 3D grids, two columns "r u" for radial ones.
/// The header carries enough to re-import the field exactly.
inline void write_plot(std::ostream& out, const Field& u) {
  const auto& d = u.domain();
  if (d.kind == DomainKind::radial_ball) {
    out << "# spnodal radial_ball n=" << d.n << " extent=" << fmt17(d.extent) << "\n";
    out << "# r u\n";
    for (std::size_t i = 0; i < u.size(); ++i) out << fmt17(d.radii[i]) << " " << fmt17(u[i]) << "\n";
    return;
  }
  out << "# vtk DataFile Version 3.0\n";
  out << "spnodal box3d mask=" << (d.ball_mask ? "ball" : "none") << " n=" << d.n << " extent=" << fmt17(d.extent)
      << "\n";
  out << "ASCII\nDATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << d.n << " " << d.n << " " << d.n << "\n";
  const double o = d.origin + d.h;
  out << "ORIGIN " << fmt17(o) << " " << fmt17(o) << " " << fmt17(o) << "\n";
  out << "SPACING " << fmt17(d.h) << " " << fmt17(d.h) << " " << fmt17(d.h) << "\n";
  out << "POINT_DATA " << u.size() << "\nSCALARS u double 1\nLOOKUP_TABLE default\n";
  for (double v : u.values()) out << fmt17(v) << "\n";
}

inline Field read_plot(std::istream& in) {
  std::string first;
  std::getline(in, first);
  auto field_of = [](const std::string& line, const std::string& key) {
    const auto pos = line.find(key + "=");
    if (pos == std::string::npos) throw std::runtime_error("plot header lacks " + key);
    const auto start = pos + key.size() + 1;
    return line.substr(start, line.find(' ', start) - start);
  };
  if (first.rfind("# spnodal radial_ball", 0) == 0) {
    const int n = std::stoi(field_of(first, "n"));
    const double extent = std::strtod(field_of(first, "extent").c_str(), nullptr);
    auto d = build_radial_grid(n, extent);
    std::vector<double> v;
    detail::read_values(in, v, d->node_count(), true);
    return Field(d, std::move(v));
  }
  if (first.rfind("# vtk DataFile", 0) == 0) {
    std::string title;
    std::getline(in, title);
    if (title.rfind("spnodal box3d", 0) != 0) throw std::runtime_error("VTK file was not written by spnodal");
    const int n = std::stoi(field_of(title, "n"));
    const double extent = std::strtod(field_of(title, "extent").c_str(), nullptr);
    auto d = detail::rebuild_domain("box3d", field_of(title, "mask"), n, extent);
    std::string line;
    while (std::getline(in, line))
      if (line.rfind("LOOKUP_TABLE", 0) == 0) break;
    std::vector<double> v;
    detail::read_values(in, v, d->node_count(), false);
    return Field(d, std::move(v));
  }
  throw std::runtime_error("unrecognized plot file");
}

/// Reads either a native field file or a plot export.
inline Field read_any_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  const int c = in.peek();
  if (c == 'S') return read_field(in);
  return read_plot(in);
}

inline std::string plot_extension(const GridDomain& d) { return d.kind == DomainKind::radial_ball ? ".dat" : ".vtk"; }

// ---- run outputs ----------------------------------------------------------

inline constexpr const char* kMetricsHeader = "iter,J,grad_norm,t,s,norm_plus,norm_minus,nonlocal,cross";

inline void write_metrics(std::ostream& out, const std::vector<IterationRecord>& history) {
  out << kMetricsHeader << "\n";
  for (const auto& r : history)
    out << r.iter << "," << fmt17(r.J) << "," << fmt17(r.grad_norm) << "," << fmt17(r.t) << "," << fmt17(r.s) << ","
        << fmt17(r.norm_plus) << "," << fmt17(r.norm_minus) << "," << fmt17(r.nonlocal) << "," << fmt17(r.cross)
        << "\n";
}

inline nlohmann::ordered_json outcome_json(const SolveOutcome& o) {
  nlohmann::ordered_json j;
  j["status"] = to_string(o.status);
  j["converged"] = o.converged();
  j["iterations"] = o.iterations;
  j[o.nodal_run ? "c0" : "cN"] = o.c0;
  j["grad_norm"] = o.grad_norm;
  j["norm"] = o.norm;
  j["nodal_domains"] = o.nodal.count;
  j["nodal_volumes"] = o.nodal.volumes;
  j["nodal_signs"] = o.nodal.signs;
  j["excited_state"] = o.excited;
  const auto& l = o.energy_bound;
  j["energy_bound"] = {{"J", l.J},
                       {"norm_sq", l.norm_sq},
                       {"gap_4J_minus_norm_sq", l.bound_gap},
                       {"holds", l.bound_holds},
                       {"norm_plus", l.norm_plus},
                       {"norm_minus", l.norm_minus},
                       {"lp_exponent", l.lp_exponent},
                       {"lp_plus", l.lp_plus},
                       {"lp_minus", l.lp_minus},
                       {"history_min_norm_plus", l.min_norm_plus},
                       {"history_min_norm_minus", l.min_norm_minus},
                       {"history_min_lp_plus", l.min_lp_plus},
                       {"history_min_lp_minus", l.min_lp_minus}};
  if (o.jacobian) {
    const auto& jd = *o.jacobian;
    j["jacobian"] = {{"G_plus", jd.G_plus},         {"G_minus", jd.G_minus},
                     {"D", jd.D},                   {"E", jd.E},
                     {"det", jd.det},               {"det_continuum", jd.det_continuum},
                     {"membership_residual", jd.membership_residual},
                     {"G_dominates", jd.G_dominates}, {"det_positive", jd.det_positive}};
  }
  if (o.dominance)
    j["sampled_dominance"] = {{"margin", o.dominance->margin},
                              {"worst_t", o.dominance->worst_t},
                              {"worst_s", o.dominance->worst_s},
                              {"samples", o.dominance->samples}};
  if (o.ground_energy && o.nodal_run) j["ground_energy"] = *o.ground_energy;
  return j;
}

inline nlohmann::ordered_json config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["domain"] = {{"kind", c.domain.kind}, {"n", c.resolved_n()}, {"extent", c.domain.extent}};
  j["nonlinearity"] = {{"form", c.nonlinearity.form},
                       {"lambda", c.nonlinearity.lambda},
                       {"p", c.nonlinearity.p},
                       {"mu", c.nonlinearity.mu},
                       {"q", c.nonlinearity.q}};
  j["solver"] = {{"cg_tol", c.solver.cg_tol},         {"proj_tol", c.solver.proj_tol},
                 {"grad_tol", c.solver.grad_tol},     {"max_iter", c.solver.max_iter},
                 {"seed", c.solver.seed},             {"init_style", c.solver.init_style},
                 {"multistart", c.solver.multistart}};
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace spnodal
