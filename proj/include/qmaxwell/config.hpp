#pragma once

// Run configuration (JSON). Schema:
//
// {
//   "grid":        { "K": 16, "N": 100 },                       N optional
//   "constraints": {
//     "n0": <field>, "u0": <field>,                              u0 optional (0)
//     "target": { "T": 1.0 } | { "e0": 0.9 }
//   },
//   "solver": { "epsilon_ladder": [...], "scheme": "newton" | "fixed_point",
//               "damping", "min_damping", "max_iters", "tol_fixed_point",
//               "tol_constraint", "divergence_window" },
//   "match":  { "T_lo", "T_hi", "tol_e", "max_expansions", "max_bisections" },
//   "lab":    { "T_min", "T_max", "points_per_decade" | "T_grid": [...],
//               "margin", "relation_tolerance", "trials", "seed", "K" },
//   "output": { "directory": "out", "format": "csv" | "json" },
//   "threads": 0
// }
//
// <field> is one of
//   { "type": "constant", "value": c }
//   { "type": "cosine", "mean": m, "amplitudes": [a1, a2, ...], "sine_amplitudes": [...] }
//       m + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x)
//   { "type": "file", "path": "samples.txt" }
//       one sample per line at x_j = j / M (last column of each row is used;
//       lines starting with '#' or a letter are skipped); resampled
//       spectrally to the grid when M != N.
//
// Relative file paths resolve against the directory of the config file.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "qmaxwell/errors.hpp"
#include "qmaxwell/grid.hpp"
#include "qmaxwell/moment_matcher.hpp"
#include "qmaxwell/solver.hpp"
#include "qmaxwell/theorem_lab.hpp"

namespace qmx {

struct FieldSpec {
  enum class Kind { constant, cosine, file };
  Kind kind = Kind::constant;
  double value = 0.0;
  double mean = 0.0;
  std::vector<double> amplitudes;
  std::vector<double> sine_amplitudes;
  std::filesystem::path path;
};

struct LabOptions {
  double T_min = 2.0;
  double T_max = 20.0;
  int points_per_decade = 64;
  std::vector<double> T_grid;  ///< explicit grid; overrides the geometric one
  std::optional<double> margin;
  double relation_tolerance = 5e-3;
  int trials = 1000;
  std::uint64_t seed = 42;
  int K = 8;  ///< inequality suite cutoff (compared against 2K)

  std::vector<double> temperatures() const {
    if (!T_grid.empty()) return T_grid;
    return geometric_grid_per_decade(T_min, T_max, points_per_decade);
  }
};

struct RunConfig {
  int K = 16;
  std::optional<int> N;
  FieldSpec n0;
  FieldSpec u0;
  std::variant<TemperatureTarget, EnergyTarget> target = TemperatureTarget{1.0};
  PenalizedSolveOptions solver;
  MatchOptions match;
  LabOptions lab;
  std::filesystem::path output_directory = "out";
  std::string format = "csv";
  unsigned threads = 0;
  std::filesystem::path base_directory;  ///< for relative field files
};

namespace detail {

inline const nlohmann::json* member(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

inline double get_number(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_number()) throw InvalidArgument(where + "." + key + " must be a number");
  return j.get<double>();
}

template <class T>
void read_number(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
  if (const auto* v = member(obj, key)) {
    const double d = get_number(*v, key, where);
    if constexpr (std::is_integral_v<T>) {
      if (d != static_cast<double>(static_cast<long long>(d)))
        throw InvalidArgument(where + "." + key + " must be an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (d < 0) throw InvalidArgument(where + "." + key + " must be non-negative");
      out = static_cast<T>(d);
    } else {
      out = d;
    }
  }
}

inline std::vector<double> read_vector(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw InvalidArgument(where + " must be an array of numbers");
  std::vector<double> v;
  for (const auto& e : j) {
    if (!e.is_number()) throw InvalidArgument(where + " must be an array of numbers");
    v.push_back(e.get<double>());
  }
  return v;
}

inline void require_object(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + " must be an object");
}

inline FieldSpec parse_field(const nlohmann::json& j, const std::string& where) {
  require_object(j, where);
  const auto* type = member(j, "type");
  if (!type || !type->is_string()) throw InvalidArgument(where + ".type must be \"constant\", \"cosine\" or \"file\"");
  FieldSpec f;
  const std::string t = type->get<std::string>();
  if (t == "constant") {
    f.kind = FieldSpec::Kind::constant;
    const auto* v = member(j, "value");
    if (!v) throw InvalidArgument(where + ".value is required for a constant field");
    f.value = get_number(*v, "value", where);
  } else if (t == "cosine") {
    f.kind = FieldSpec::Kind::cosine;
    const auto* m = member(j, "mean");
    if (!m) throw InvalidArgument(where + ".mean is required for a cosine field");
    f.mean = get_number(*m, "mean", where);
    if (const auto* a = member(j, "amplitudes")) f.amplitudes = read_vector(*a, where + ".amplitudes");
    if (const auto* b = member(j, "sine_amplitudes")) f.sine_amplitudes = read_vector(*b, where + ".sine_amplitudes");
  } else if (t == "file") {
    f.kind = FieldSpec::Kind::file;
    const auto* p = member(j, "path");
    if (!p || !p->is_string()) throw InvalidArgument(where + ".path is required for a file field");
    f.path = p->get<std::string>();
  } else {
    throw InvalidArgument(where + ".type \"" + t + "\" is not one of constant, cosine, file");
  }
  return f;
}

inline std::vector<double> read_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open field file " + path.string());
  std::vector<double> v;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const char c = line[first];
    if (c == '#' || std::isalpha(static_cast<unsigned char>(c))) continue;
    for (char& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    std::istringstream ss(line);
    double x = 0.0, last = 0.0;
    bool any = false;
    while (ss >> x) {
      last = x;
      any = true;
    }
    if (!any || !ss.eof())
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": not a numeric row");
    v.push_back(last);
  }
  if (v.empty()) throw InvalidArgument("field file " + path.string() + " has no samples");
  return v;
}

}  // namespace detail

/// Parses and validates a configuration document. Every numeric field is
/// checked here, before any computation.
inline RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_directory = {}) {
  using detail::member;
  detail::require_object(doc, "config");
  RunConfig c;
  c.base_directory = base_directory;
  static const std::vector<std::string> known{"grid", "constraints", "solver", "match", "lab", "output", "threads"};
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw InvalidArgument("unknown config section \"" + it.key() + "\"");

  if (const auto* g = member(doc, "grid")) {
    detail::require_object(*g, "grid");
    detail::read_number(*g, "K", c.K, "grid");
    if (member(*g, "N")) {
      int N = 0;
      detail::read_number(*g, "N", N, "grid");
      c.N = N;
    }
  }
  if (c.K < 0) throw InvalidArgument("grid.K must be >= 0");
  if (c.N && *c.N < 2 * (2 * c.K + 1))
    throw InvalidArgument("grid.N=" + std::to_string(*c.N) + " is below 2(2K+1)=" + std::to_string(2 * (2 * c.K + 1)));

  const auto* cons = member(doc, "constraints");
  if (!cons) throw InvalidArgument("config.constraints is required");
  detail::require_object(*cons, "constraints");
  const auto* n0 = member(*cons, "n0");
  if (!n0) throw InvalidArgument("constraints.n0 is required");
  c.n0 = detail::parse_field(*n0, "constraints.n0");
  if (const auto* u0 = member(*cons, "u0")) c.u0 = detail::parse_field(*u0, "constraints.u0");
  if (const auto* t = member(*cons, "target")) {
    detail::require_object(*t, "constraints.target");
    const auto* T = member(*t, "T");
    const auto* e0 = member(*t, "e0");
    if ((T != nullptr) == (e0 != nullptr))
      throw InvalidArgument("constraints.target must specify exactly one of \"T\" or \"e0\"");
    if (T) {
      const double v = detail::get_number(*T, "T", "constraints.target");
      if (!(v > 0.0)) throw InvalidArgument("constraints.target.T must be positive");
      c.target = TemperatureTarget{v};
    } else {
      const double v = detail::get_number(*e0, "e0", "constraints.target");
      if (!std::isfinite(v)) throw InvalidArgument("constraints.target.e0 must be finite");
      c.target = EnergyTarget{v};
    }
  }

  if (const auto* s = member(doc, "solver")) {
    detail::require_object(*s, "solver");
    if (const auto* l = member(*s, "epsilon_ladder")) c.solver.epsilon_ladder = detail::read_vector(*l, "solver.epsilon_ladder");
    if (const auto* sc = member(*s, "scheme")) {
      const std::string name = sc->is_string() ? sc->get<std::string>() : "";
      if (name == "newton")
        c.solver.scheme = IterationScheme::newton;
      else if (name == "fixed_point")
        c.solver.scheme = IterationScheme::fixed_point;
      else
        throw InvalidArgument("solver.scheme must be \"newton\" or \"fixed_point\"");
    }
    detail::read_number(*s, "damping", c.solver.damping, "solver");
    detail::read_number(*s, "min_damping", c.solver.min_damping, "solver");
    detail::read_number(*s, "max_iters", c.solver.max_iters, "solver");
    detail::read_number(*s, "tol_fixed_point", c.solver.tol_fixed_point, "solver");
    detail::read_number(*s, "tol_constraint", c.solver.tol_constraint, "solver");
    detail::read_number(*s, "divergence_window", c.solver.divergence_window, "solver");
  }
  c.solver.validate();

  if (const auto* m = member(doc, "match")) {
    detail::require_object(*m, "match");
    detail::read_number(*m, "T_lo", c.match.T_lo, "match");
    detail::read_number(*m, "T_hi", c.match.T_hi, "match");
    detail::read_number(*m, "tol_e", c.match.tol_e, "match");
    detail::read_number(*m, "max_expansions", c.match.max_expansions, "match");
    detail::read_number(*m, "max_bisections", c.match.max_bisections, "match");
  }
  if (!(c.match.T_lo > 0.0 && c.match.T_hi > c.match.T_lo)) throw InvalidArgument("match requires 0 < T_lo < T_hi");
  if (!(c.match.tol_e > 0.0)) throw InvalidArgument("match.tol_e must be positive");
  if (c.match.max_expansions < 0 || c.match.max_bisections < 1)
    throw InvalidArgument("match.max_expansions must be >= 0 and match.max_bisections >= 1");

  if (const auto* l = member(doc, "lab")) {
    detail::require_object(*l, "lab");
    detail::read_number(*l, "T_min", c.lab.T_min, "lab");
    detail::read_number(*l, "T_max", c.lab.T_max, "lab");
    detail::read_number(*l, "points_per_decade", c.lab.points_per_decade, "lab");
    if (const auto* g = member(*l, "T_grid")) c.lab.T_grid = detail::read_vector(*g, "lab.T_grid");
    if (member(*l, "margin")) {
      double margin = 0.0;
      detail::read_number(*l, "margin", margin, "lab");
      if (!(margin >= 0.0)) throw InvalidArgument("lab.margin must be >= 0");
      c.lab.margin = margin;
    }
    detail::read_number(*l, "relation_tolerance", c.lab.relation_tolerance, "lab");
    detail::read_number(*l, "trials", c.lab.trials, "lab");
    detail::read_number(*l, "seed", c.lab.seed, "lab");
    detail::read_number(*l, "K", c.lab.K, "lab");
  }
  if (c.lab.T_grid.empty()) {
    if (!(c.lab.T_min > 0.0 && c.lab.T_max > c.lab.T_min)) throw InvalidArgument("lab requires 0 < T_min < T_max");
    if (c.lab.points_per_decade < 1) throw InvalidArgument("lab.points_per_decade must be >= 1");
  }
  const auto Ts = c.lab.temperatures();
  if (Ts.size() < 3) throw InvalidArgument("lab temperature grid needs at least 3 points");
  for (std::size_t i = 0; i < Ts.size(); ++i)
    if (!(Ts[i] > 0.0) || (i > 0 && !(Ts[i] > Ts[i - 1])))
      throw InvalidArgument("lab.T_grid must be positive and strictly increasing");
  if (!(c.lab.relation_tolerance > 0.0)) throw InvalidArgument("lab.relation_tolerance must be positive");
  if (c.lab.trials < 1) throw InvalidArgument("lab.trials must be >= 1");
  if (c.lab.K < 1) throw InvalidArgument("lab.K must be >= 1");

  if (const auto* o = member(doc, "output")) {
    detail::require_object(*o, "output");
    if (const auto* d = member(*o, "directory")) {
      if (!d->is_string()) throw InvalidArgument("output.directory must be a string");
      c.output_directory = d->get<std::string>();
    }
    if (const auto* f = member(*o, "format")) {
      if (!f->is_string()) throw InvalidArgument("output.format must be \"csv\" or \"json\"");
      c.format = f->get<std::string>();
    }
  }
  if (c.format != "csv" && c.format != "json") throw InvalidArgument("output.format must be \"csv\" or \"json\"");
  detail::read_number(doc, "threads", c.threads, "config");
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

inline GridPtr make_grid(const RunConfig& c) { return c.N ? build_grid(c.K, *c.N) : build_grid(c.K); }

/// Samples a field spec on the grid. File inputs with a different sample
/// count are resampled spectrally and the resampling is reported on `log`.
inline Field materialize(const FieldSpec& f, const SpectralGrid& g, const std::filesystem::path& base,
                         const std::string& name, std::ostream& log = std::cerr) {
  switch (f.kind) {
    case FieldSpec::Kind::constant:
      return Field::constant(g, f.value);
    case FieldSpec::Kind::cosine:
      return Field::sample(g, [&](double x) {
        double v = f.mean;
        for (std::size_t k = 0; k < f.amplitudes.size(); ++k) v += f.amplitudes[k] * std::cos(kTwoPi * (k + 1) * x);
        for (std::size_t k = 0; k < f.sine_amplitudes.size(); ++k)
          v += f.sine_amplitudes[k] * std::sin(kTwoPi * (k + 1) * x);
        return v;
      });
    case FieldSpec::Kind::file: {
      const auto path = f.path.is_absolute() || base.empty() ? f.path : base / f.path;
      const std::vector<double> v = detail::read_samples(path);
      const Field raw = Field::real(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      if (raw.size() == g.N) return raw;
      log << "note: " << name << " resampled spectrally from " << raw.size() << " to " << g.N << " samples ("
          << path.string() << ")\n";
      return resample(raw, g.N);
    }
  }
  throw InvalidArgument("unknown field kind");
}

}  // namespace qmx
