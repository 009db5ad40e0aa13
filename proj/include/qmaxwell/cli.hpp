#pragma once

// Command implementations behind the qmaxwell executable. Each command takes a
// validated RunConfig, writes its files into the output directory and
// returns a process exit code.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qmaxwell/config.hpp"
#include "qmaxwell/density_operator.hpp"
#include "qmaxwell/errors.hpp"
#include "qmaxwell/moment_matcher.hpp"
#include "qmaxwell/report.hpp"
#include "qmaxwell/solver.hpp"
#include "qmaxwell/theorem_lab.hpp"

namespace qmx {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitSolver = 2, kExitVerification = 3 };

struct CliOverrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

inline void apply_overrides(RunConfig& c, const CliOverrides& o) {
  if (o.out) c.output_directory = *o.out;
  if (o.seed) c.lab.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
}

namespace detail {

inline nlohmann::json options_json(const RunConfig& c, const GridPtr& g) {
  const auto& s = c.solver;
  return {
      {"grid", {{"K", g->K}, {"N", g->N}, {"D", g->D}}},
      {"solver",
       {{"epsilon_ladder", s.epsilon_ladder},
        {"scheme", to_string(s.scheme)},
        {"damping", s.damping},
        {"min_damping", s.min_damping},
        {"max_iters", s.max_iters},
        {"tol_fixed_point", s.tol_fixed_point},
        {"tol_constraint", s.tol_constraint},
        {"divergence_window", s.divergence_window},
        {"min_density", kMinDensity},
        {"degeneracy_threshold", kDegeneracyThreshold}}},
      {"match",
       {{"T_lo", c.match.T_lo},
        {"T_hi", c.match.T_hi},
        {"tol_e", c.match.tol_e},
        {"max_expansions", c.match.max_expansions},
        {"max_bisections", c.match.max_bisections},
        {"pure_state_tolerance", kPureStateTolerance}}},
      {"lab",
       {{"temperatures", c.lab.temperatures()},
        {"margin", c.lab.margin.value_or(10.0 * s.tol_fixed_point)},
        {"relation_tolerance", c.lab.relation_tolerance},
        {"trials", c.lab.trials},
        {"seed", c.lab.seed},
        {"K", c.lab.K},
        {"ratio_stability", kRatioStability},
        {"negZ_tolerance", kNegZTolerance}}},
      {"tolerances",
       {{"hermitian", kHermitianTolerance},
        {"psd", kPsdTolerance},
        {"entropy_floor", kEntropyFloor},
        {"circulation", kCirculationTolerance},
        {"real_field", kRealTolerance}}},
  };
}

inline nlohmann::json meta_json(const std::string& command, const RunConfig& c, const GridPtr& g,
                                const std::vector<std::string>& files) {
  nlohmann::json m = options_json(c, g);
  m["program"] = "qmaxwell";
  m["version"] = kVersion;
  m["command"] = command;
  m["threads"] = c.threads;
  m["csv_number_format"] = "%.17g";
  m["format"] = c.format;
  m["files"] = files;
  return m;
}

inline nlohmann::json report_json(const SolveReport& r) {
  nlohmann::json rungs = nlohmann::json::array();
  for (const auto& x : r.rungs)
    rungs.push_back({{"epsilon", x.epsilon},
                     {"iterations", x.iterations},
                     {"converged", x.converged},
                     {"norm_A", x.norm_A},
                     {"constraint_residual", x.constraint_residual},
                     {"fixed_point_residual", x.fixed_point_residual},
                     {"noise_floor", x.noise_floor},
                     {"noise_limited", x.noise_limited},
                     {"energy", x.energy},
                     {"entropy", x.entropy},
                     {"penalized_free_energy", x.penalized_free_energy}});
  return {{"temperature", r.temperature},
          {"converged", r.converged},
          {"total_iterations", r.total_iterations()},
          {"rungs", std::move(rungs)}};
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

/// moments.csv on the nodes of the configuration grid.
inline Table moments_table(const DensityOperator& rho, const SpectralGrid& g) {
  const Moments m = moments_at(rho, g.nodes);
  Table t{{"x", "n", "nu", "k", "w"}, {}};
  const Eigen::VectorXd n = m.n.real_values(), nu = m.current.real_values(), k = m.k.real_values(),
                        w = m.w.real_values();
  for (int j = 0; j < g.N; ++j) t.add({g.nodes(j), n(j), nu(j), k(j), w(j)});
  return t;
}

struct Inputs {
  GridPtr grid;
  Field n0;
  Field u0;
};

inline Inputs prepare(const RunConfig& c, std::ostream& log) {
  Inputs in;
  in.grid = make_grid(c);
  in.n0 = materialize(c.n0, *in.grid, c.base_directory, "n0", log);
  in.u0 = materialize(c.u0, *in.grid, c.base_directory, "u0", log);
  validate_density(in.n0, *in.grid);
  (void)gauge_phase(in.u0, *in.grid);
  std::filesystem::create_directories(c.output_directory);
  return in;
}

inline nlohmann::json solution_json(const Inputs& in, const DensityOperator& rho, double temperature, bool pure,
                                    double m0) {
  const SpectralGrid& g = *in.grid;
  const Moments m = moments_at(rho, g.nodes);
  const Eigen::VectorXd nu_target = in.n0.real_values().cwiseProduct(in.u0.real_values());
  const double E = energy(rho), S = entropy(rho);
  nlohmann::json j;
  j["temperature"] = temperature;
  j["pure_state"] = pure;
  j["m0"] = m0;
  j["energy"] = E;
  j["entropy"] = S;
  j["free_energy"] = E + temperature * S;
  j["eigenvalues"] = to_std(rho.eigenvalues());
  j["operator_grid"] = {{"K", rho.grid().K}, {"N", rho.grid().N}, {"D", rho.grid().D}};
  j["residuals"] = {
      {"density_L2", l2_norm(Eigen::VectorXd(m.n.real_values() - in.n0.real_values()))},
      {"current_L2", l2_norm(Eigen::VectorXd(m.current.real_values() - nu_target))},
  };
  return j;
}

inline int solve_at_temperature(const std::string& command, const RunConfig& c, double T, std::ostream& out,
                                std::ostream& log) {
  const Inputs in = prepare(c, log);
  const double m0 = compute_m0(in.n0, in.u0, *in.grid);
  const TwoMomentSolution s = solve_two_moment(in.n0, in.u0, T, in.grid, c.solver);
  nlohmann::json j = solution_json(in, s.rho, T, false, m0);
  j["command"] = command;
  j["target"] = {{"T", T}};
  j["A"] = to_std(s.A.real_values());
  j["residuals"]["constraint_L2"] = s.report.last().constraint_residual;
  j["residuals"]["fixed_point_L2"] = s.report.last().fixed_point_residual;
  j["residuals"]["chemical_potential_identity_L2"] = chemical_potential_identity_check(s.ungauged, s.A, T);
  j["constraint_met"] = s.report.constraint_met(c.solver.tol_constraint);
  j["report"] = report_json(s.report);
  write_json(c.output_directory / "solution.json", j);
  const std::string moments_file = write_table(c.output_directory, "moments", moments_table(s.rho, *in.grid), c.format);
  write_json(c.output_directory / "meta.json", meta_json(command, c, in.grid, {"solution.json", moments_file}));
  out << "T=" << format_double(T) << " E=" << format_double(energy(s.rho)) << " S=" << format_double(entropy(s.rho))
      << " constraint_L2=" << format_double(s.report.last().constraint_residual) << '\n';
  return kExitOk;
}

inline int solve_at_energy(const std::string& command, const RunConfig& c, double e0, std::ostream& out,
                           std::ostream& log) {
  const Inputs in = prepare(c, log);
  const EnergyMatch m = match_energy(in.n0, in.u0, e0, in.grid, c.match, c.solver);
  nlohmann::json j = solution_json(in, m.rho, m.T0, m.pure_state, m.m0);
  j["command"] = command;
  j["target"] = {{"e0", e0}};
  j["evaluations"] = m.evaluations;
  j["energy_mismatch"] = m.energy - e0;
  if (m.solution) {
    const auto& s = *m.solution;
    j["A"] = to_std(s.A.real_values());
    j["residuals"]["constraint_L2"] = s.report.last().constraint_residual;
    j["residuals"]["fixed_point_L2"] = s.report.last().fixed_point_residual;
    j["residuals"]["chemical_potential_identity_L2"] = chemical_potential_identity_check(s.ungauged, s.A, m.T0);
    j["constraint_met"] = s.report.constraint_met(c.solver.tol_constraint);
    j["report"] = report_json(s.report);
  } else {
    j["A"] = nullptr;
    j["free_energy"] = m.energy;
    j["constraint_met"] = true;
  }
  write_json(c.output_directory / "solution.json", j);
  const std::string moments_file = write_table(c.output_directory, "moments", moments_table(m.rho, *in.grid), c.format);
  write_json(c.output_directory / "meta.json", meta_json(command, c, in.grid, {"solution.json", moments_file}));
  out << "e0=" << format_double(e0) << " m0=" << format_double(m.m0)
      << (m.pure_state ? " pure_state" : " T0=" + format_double(m.T0)) << " E=" << format_double(m.energy) << '\n';
  return kExitOk;
}

inline Table scan_table(const TemperatureScan& scan) {
  Table t{{"T", "E", "S", "F", "normA"}, {}};
  for (const auto& r : scan.rows) t.add({r.T, r.energy, r.entropy, r.free_energy, r.norm_A});
  return t;
}

inline nlohmann::json scan_failures(const TemperatureScan& scan) {
  nlohmann::json f = nlohmann::json::array();
  for (const auto& r : scan.rows)
    if (!r.ok) f.push_back({{"T", r.T}, {"error", r.error}});
  return f;
}

}  // namespace detail

/// Dispatches on the target: a temperature gives the two-moment minimizer,
/// an energy target goes through match_energy.
inline int cmd_solve(const RunConfig& c, std::ostream& out = std::cout, std::ostream& log = std::cerr) {
  if (const auto* t = std::get_if<TemperatureTarget>(&c.target)) return detail::solve_at_temperature("solve", c, t->T, out, log);
  return detail::solve_at_energy("solve", c, std::get<EnergyTarget>(c.target).e0, out, log);
}

inline int cmd_match_energy(const RunConfig& c, std::ostream& out = std::cout, std::ostream& log = std::cerr) {
  const auto* e = std::get_if<EnergyTarget>(&c.target);
  if (!e) throw InvalidArgument("match-energy needs constraints.target.e0");
  return detail::solve_at_energy("match-energy", c, e->e0, out, log);
}

inline int cmd_scan(const RunConfig& c, std::ostream& out = std::cout, std::ostream& log = std::cerr) {
  const detail::Inputs in = detail::prepare(c, log);
  const TemperatureScan scan = temperature_scan(in.n0, in.u0, c.lab.temperatures(), in.grid, c.solver, c.threads);
  const std::string file = write_table(c.output_directory, "scan", detail::scan_table(scan), c.format);
  nlohmann::json meta = detail::meta_json("scan", c, in.grid, {file});
  meta["m0"] = scan.m0;
  meta["failures"] = detail::scan_failures(scan);
  write_json(c.output_directory / "meta.json", meta);
  for (const auto& r : scan.rows)
    if (!r.ok) log << "scan: T=" << format_double(r.T) << " failed: " << r.error << '\n';
  out << "scan: " << scan.rows.size() << " temperatures, " << detail::scan_failures(scan).size() << " failures\n";
  return scan.all_ok() ? kExitOk : kExitSolver;
}

inline int cmd_verify(const RunConfig& c, std::ostream& out = std::cout, std::ostream& log = std::cerr) {
  const detail::Inputs in = detail::prepare(c, log);
  const TemperatureScan scan = temperature_scan(in.n0, in.u0, c.lab.temperatures(), in.grid, c.solver, c.threads);
  const MonotonicityReport mono = check_monotonicity(scan, c.lab.margin);

  std::vector<std::string> files;
  files.push_back(write_table(c.output_directory, "scan", detail::scan_table(scan), c.format));

  Table rel_table{{"T1", "T2", "lhs", "rhs", "defect"}, {}};
  std::optional<RelationReport> rel;
  if (scan.all_ok()) {
    rel = check_energy_entropy_relation(scan);
    for (const auto& r : rel->rows) rel_table.add({r.T1, r.T2, r.lhs, r.rhs, r.defect});
  }
  files.push_back(write_table(c.output_directory, "relation", rel_table, c.format));

  const InequalityReport ineq = inequality_suite(c.lab.seed, c.lab.trials, c.lab.K, c.threads);
  Table ineq_table{{"name", "max_ratio_K", "max_ratio_2K", "verdict"}, {}};
  for (const auto& r : ineq.rows)
    ineq_table.add({r.name, r.max_ratio_K, r.max_ratio_2K, std::string(r.pass ? "pass" : "fail")});
  files.push_back(write_table(c.output_directory, "inequalities", ineq_table, c.format));

  const bool relation_ok = rel && rel->max_defect <= c.lab.relation_tolerance;
  nlohmann::json verdicts = {
      {"energy_increasing", mono.energy_increasing()},
      {"entropy_decreasing", mono.entropy_decreasing()},
      {"monotonicity_margin", mono.margin},
      {"energy_violations", mono.energy_violations},
      {"entropy_violations", mono.entropy_violations},
      {"relation", relation_ok},
      {"relation_max_defect", rel ? nlohmann::json(rel->max_defect) : nlohmann::json(nullptr)},
      {"inequalities", ineq.pass()},
      {"varsigma_sums", {{"K", ineq.varsigma_K}, {"sum", ineq.varsigma_sums}}},
  };
  nlohmann::json meta = detail::meta_json("verify", c, in.grid, files);
  meta["m0"] = scan.m0;
  meta["failures"] = detail::scan_failures(scan);
  meta["verdicts"] = verdicts;
  write_json(c.output_directory / "meta.json", meta);

  const bool ok = scan.all_ok() && mono.pass() && relation_ok && ineq.pass();
  auto verdict = [](bool b) { return b ? "pass" : "FAIL"; };
  out << "monotonicity E: " << verdict(mono.energy_increasing()) << " (" << mono.energy_violations
      << " secants below margin " << format_double(mono.margin) << ")\n";
  out << "monotonicity S: " << verdict(mono.entropy_decreasing()) << " (" << mono.entropy_violations
      << " secants below margin)\n";
  out << "energy-entropy relation: " << verdict(relation_ok)
      << " (max defect " << (rel ? format_double(rel->max_defect) : std::string("n/a")) << ", tolerance "
      << format_double(c.lab.relation_tolerance) << ")\n";
  for (const auto& r : ineq.rows)
    out << "inequality " << r.name << ": " << verdict(r.pass) << " (" << format_double(r.max_ratio_K) << ", "
        << format_double(r.max_ratio_2K) << ")\n";
  for (const auto& r : scan.rows)
    if (!r.ok) log << "verify: T=" << format_double(r.T) << " failed: " << r.error << '\n';
  return ok ? kExitOk : kExitVerification;
}

/// Maps library exceptions to exit codes.
template <class Command>
int run_guarded(Command&& command, std::ostream& log = std::cerr) {
  try {
    return command();
  } catch (const InfeasibleTarget& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SolverError& e) {
    log << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const Error& e) {
    log << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

/// Loads the config, applies overrides and runs `command`
/// ("solve" | "verify" | "scan" | "match-energy").
inline int run_command(const std::string& command, const std::filesystem::path& config_path,
                       const CliOverrides& overrides, std::ostream& out = std::cout, std::ostream& log = std::cerr) {
  return run_guarded(
      [&] {
        RunConfig c = load_config(config_path);
        apply_overrides(c, overrides);
        if (command == "solve") return cmd_solve(c, out, log);
        if (command == "verify") return cmd_verify(c, out, log);
        if (command == "scan") return cmd_scan(c, out, log);
        if (command == "match-energy") return cmd_match_energy(c, out, log);
        throw InvalidArgument("unknown command \"" + command + "\"");
      },
      log);
}

}  // namespace qmx
