#pragma once

// Command-line front end: solve, ground, verify, sweep and export.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"

#include "spnodal/io.hpp"
#include "spnodal/verify.hpp"

namespace spnodal {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitVerifyFailed = 2,
  kExitNoConvergence = 3,
  kExitUsage = 64,
  kExitBadConfig = 65,
};

namespace detail {

inline const std::vector<std::pair<std::string, std::string>>& config_flags() {
  static const std::vector<std::pair<std::string, std::string>> flags = {
      {"domain", "ball (radial), box or ball3d"},
      {"n", "grid nodes per axis (radial: profile nodes)"},
      {"extent", "ball radius or box side"},
      {"form", "pure_power or two_power"},
      {"lambda", "coefficient of |u|^{p-2}u"},
      {"p", "exponent in (4, 6)"},
      {"mu", "second coefficient (two_power)"},
      {"q", "second exponent in (4, 6)"},
      {"cg_tol", "relative residual of the Poisson solves"},
      {"proj_tol", "tolerance of the Nehari projections"},
      {"grad_tol", "relative H1 gradient tolerance"},
      {"max_iter", "descent iteration cap"},
      {"seed", "seed for random starts"},
      {"init", "start style: dipole, mode2, random_signed, radial2"},
      {"multistart", "number of start styles (1 to 4)"},
      {"out", "output directory"},
      {"field_format", "native, plot or both"},
  };
  return flags;
}

/// Config flags shared by the subcommands; values stay strings until the
/// config is assembled so bad values surface as configuration errors.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key = value configuration file");
    for (const auto& [key, help] : config_flags()) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      cmd->add_option_function<std::string>(flag, [this, key](const std::string& v) { values[key] = v; }, help);
    }
  }

  RunConfig assemble() const {
    RunConfig c = config_file.empty() ? RunConfig{} : load_config(config_file);
    for (const auto& [key, help] : config_flags()) {
      auto it = values.find(key);
      if (it != values.end()) apply_setting(c, key, it->second);
    }
    validate(c);
    return c;
  }
};

inline void print_outcome(std::ostream& out, const SolveOutcome& o) {
  out.precision(12);
  out << (o.nodal_run ? "c0 = " : "cN = ") << o.c0 << "\n";
  out << "status = " << to_string(o.status) << " after " << o.iterations << " iterations\n";
  out << "grad_norm = " << o.grad_norm << ", ||w|| = " << o.norm << "\n";
  out << "nodal domains = " << o.nodal.count << (o.excited ? " (excited state)" : "") << "\n";
  out << "4J - ||w||^2 = " << o.energy_bound.bound_gap << "\n";
  if (o.nodal_run) out << "||w+|| = " << o.energy_bound.norm_plus << ", ||w-|| = " << o.energy_bound.norm_minus << "\n";
  if (o.jacobian)
    out << "G+ = " << o.jacobian->G_plus << ", G- = " << o.jacobian->G_minus << ", D = " << o.jacobian->D
        << ", det = " << o.jacobian->det << "\n";
  if (o.dominance) out << "sampled dominance margin = " << o.dominance->margin << "\n";
}

inline void write_run_files(const RunConfig& c, const std::filesystem::path& dir, const SolveOutcome& o,
                            nlohmann::ordered_json extra = {}) {
  std::filesystem::create_directories(dir);
  std::ostringstream metrics;
  write_metrics(metrics, o.history);
  write_text(dir / "metrics.csv", metrics.str());
  const std::string fmt = c.output.field_format;
  if (fmt == "native" || fmt == "both") write_field((dir / "w.field").string(), o.w);
  if (fmt == "plot" || fmt == "both") {
    std::ostringstream plot;
    write_plot(plot, o.w);
    write_text(dir / ("w" + plot_extension(o.w.domain())), plot.str());
  }
  nlohmann::ordered_json j;
  j["config"] = config_json(c);
  j["result"] = outcome_json(o);
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_text(dir / "report.json", j.dump(2) + "\n");
}

struct NodalRun {
  MultiStartOutcome ms;
  nlohmann::ordered_json starts;
};

inline NodalRun run_nodal(const RunConfig& c, const PoissonSolver& poisson, const PowerNonlinearity& nl) {
  NodalRun r;
  r.ms = minimize_nodal_multistart(poisson, nl, start_styles(c), c.solver.seed, minimizer_options(c));
  r.starts = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < r.ms.runs.size(); ++k) {
    const auto& o = r.ms.runs[k];
    r.starts.push_back({{"init", to_string(r.ms.styles[k])},
                        {"status", to_string(o.status)},
                        {"c0", o.c0},
                        {"nodal_domains", o.nodal.count},
                        {"selected", k == r.ms.best}});
  }
  return r;
}

inline SolveOutcome run_ground(const RunConfig& c, const PoissonSolver& poisson, const PowerNonlinearity& nl) {
  const Field u0 = positive_part(initial_guess(poisson.domain_ptr(), InitStyle::radial2, c.solver.seed));
  return minimize_ground(poisson, nl, u0, minimizer_options(c));
}

inline int cmd_solve(const RunConfig& c, bool with_ground, std::ostream& out, std::ostream& err) {
  const auto d = make_domain(c);
  const auto nl = make_nonlinearity(c);
  PoissonSolver poisson(d, c.solver.cg_tol);
  auto run = run_nodal(c, poisson, nl);
  SolveOutcome best = run.ms.runs[run.ms.best];
  if (with_ground) best.ground_energy = run_ground(c, poisson, nl).c0;
  nlohmann::ordered_json extra;
  extra["starts"] = run.starts;
  if (!run.ms.warning.empty()) extra["warning"] = run.ms.warning;
  write_run_files(c, c.output.directory, best, extra);
  out << "domain: " << d->describe() << "\n";
  print_outcome(out, best);
  if (best.ground_energy) out << "cN = " << *best.ground_energy << "\n";
  if (!run.ms.warning.empty()) err << "warning: " << run.ms.warning << "\n";
  if (!best.converged() || best.nodal.count != 2) {
    err << "error: no converged two-domain minimizer (status " << to_string(best.status) << ", "
        << best.nodal.count << " nodal domains, grad_norm " << best.grad_norm << ")\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}

inline int cmd_ground(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto d = make_domain(c);
  const auto nl = make_nonlinearity(c);
  PoissonSolver poisson(d, c.solver.cg_tol);
  const auto o = run_ground(c, poisson, nl);
  write_run_files(c, c.output.directory, o);
  out << "domain: " << d->describe() << "\n";
  print_outcome(out, o);
  if (!o.converged()) {
    err << "error: ground-state descent did not converge (status " << to_string(o.status) << ", grad_norm "
        << o.grad_norm << ")\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}

inline int cmd_verify(const RunConfig& c, std::size_t samples, const std::string& fault, std::ostream& out) {
  const auto d = make_domain(c);
  const auto nl = make_nonlinearity(c);
  VerifyOptions opts;
  opts.fault = parse_fault(fault);
  opts.minimizer_max_iter = c.solver.max_iter;
  const auto rep = run_suite(d, nl, c.solver.seed, samples, opts);
  std::filesystem::create_directories(c.output.directory);
  write_text(std::filesystem::path(c.output.directory) / "verify.json", rep.to_json().dump(2) + "\n");
  out.precision(3);
  for (const auto& chk : rep.checks)
    out << (chk.pass ? "PASS " : "FAIL ") << chk.name << "  worst=" << chk.worst << " tol=" << chk.tolerance
        << " n=" << chk.count << (chk.note.empty() ? "" : "  (" + chk.note + ")") << "\n";
  out << (rep.overall_pass ? "all checks passed" : "verification FAILED") << "\n";
  return rep.overall_pass ? kExitOk : kExitVerifyFailed;
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_double("p-list", trim(tok)));
  if (out.empty()) throw ConfigError("p-list must hold at least one value");
  return out;
}

inline int cmd_sweep(RunConfig c, const std::string& plist, std::ostream& out, std::ostream& err) {
  const auto ps = parse_list(plist);
  for (double p : ps) {
    RunConfig row = c;
    row.nonlinearity.p = p;
    validate(row);
  }
  const auto d = make_domain(c);
  PoissonSolver poisson(d, c.solver.cg_tol);
  std::ostringstream csv;
  csv << "p,c0,cN,norm,norm_plus,norm_minus,det\n";
  int status = kExitOk;
  for (double p : ps) {
    RunConfig row = c;
    row.nonlinearity.p = p;
    const auto nl = make_nonlinearity(row);
    auto run = run_nodal(row, poisson, nl);
    SolveOutcome best = run.ms.runs[run.ms.best];
    best.ground_energy = run_ground(row, poisson, nl).c0;
    const std::string tag = "p_" + fmt17(p);
    write_run_files(row, std::filesystem::path(c.output.directory) / tag, best, {{"starts", run.starts}});
    const double det = best.jacobian ? best.jacobian->det : std::nan("");
    csv << fmt17(p) << "," << fmt17(best.c0) << "," << fmt17(*best.ground_energy) << "," << fmt17(best.norm) << ","
        << fmt17(best.energy_bound.norm_plus) << "," << fmt17(best.energy_bound.norm_minus) << "," << fmt17(det) << "\n";
    out << "p = " << p << ": c0 = " << best.c0 << ", cN = " << *best.ground_energy << ", "
        << to_string(best.status) << ", " << best.nodal.count << " nodal domains\n";
    if (!best.converged() || best.nodal.count != 2) {
      err << "error: p = " << p << " did not reach a converged two-domain minimizer\n";
      status = kExitNoConvergence;
    }
  }
  std::filesystem::create_directories(c.output.directory);
  write_text(std::filesystem::path(c.output.directory) / "sweep.csv", csv.str());
  return status;
}

inline int cmd_export(const std::string& in, std::string out_path, const std::string& to, std::ostream& out) {
  if (to != "plot" && to != "native") throw ConfigError("--to must be plot or native");
  const Field u = read_any_field(in);
  if (out_path.empty()) {
    const auto base = std::filesystem::path(in).replace_extension();
    out_path = base.string() + (to == "plot" ? plot_extension(u.domain()) : ".field");
  }
  std::ostringstream text;
  if (to == "plot") write_plot(text, u);
  else write_field(text, u);
  write_text(out_path, text.str());
  out << "wrote " << out_path << " (" << u.size() << " values, " << u.domain().describe() << ")\n";
  return kExitOk;
}

}  // namespace detail

/// Parses argv, runs one subcommand and returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Least-energy nodal solutions of a Schroedinger-Poisson system on a bounded domain", "spnodal"};
  app.require_subcommand(1);

  detail::ConfigFlags solve_flags, ground_flags, verify_flags, sweep_flags;
  bool with_ground = false;
  std::size_t samples = 100;
  std::string fault = "none";
  std::string plist;
  std::string export_in, export_out, export_to = "plot";

  auto* solve = app.add_subcommand("solve", "minimize J over the nodal Nehari set");
  solve_flags.attach(solve);
  solve->add_flag("--with-ground", with_ground, "also compute the ground-state energy");
  auto* ground = app.add_subcommand("ground", "minimize J over the Nehari manifold");
  ground_flags.attach(ground);
  auto* verify = app.add_subcommand("verify", "run the verification suite");
  verify_flags.attach(verify);
  verify->add_option("--samples", samples, "random fields per check");
  verify->add_option("--fault", fault, "inject a known defect (sensitivity testing)");
  auto* sweep = app.add_subcommand("sweep", "solve for a list of exponents p");
  sweep_flags.attach(sweep);
  sweep->add_option("--p-list", plist, "comma-separated exponents")->required();
  auto* exp = app.add_subcommand("export", "convert a stored field between native and plot formats");
  exp->add_option("--in", export_in, "input field (native or plot export)")->required();
  exp->add_option("--out", export_out, "output path");
  exp->add_option("--to", export_to, "plot or native");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*solve) return detail::cmd_solve(solve_flags.assemble(), with_ground, out, err);
    if (*ground) return detail::cmd_ground(ground_flags.assemble(), out, err);
    if (*verify) {
      if (samples == 0) throw ConfigError("--samples must be positive");
      parse_fault(fault);
      return detail::cmd_verify(verify_flags.assemble(), samples, fault, out);
    }
    if (*sweep) return detail::cmd_sweep(sweep_flags.assemble(), plist, out, err);
    return detail::cmd_export(export_in, export_out, export_to, out);
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const ConvergenceError& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const std::invalid_argument& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace spnodal
