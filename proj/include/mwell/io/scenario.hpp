#pragma once

// Scenario files: model, initial state, backend, sample grids and the optional
// per-command blocks. See scenarios/README.md for the schema.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mwell/analytic.hpp"
#include "mwell/evolution.hpp"
#include "mwell/io/ini.hpp"
#include "mwell/model.hpp"
#include "mwell/protocol.hpp"
#include "mwell/spectral.hpp"

namespace mwell::io {

enum class Backend { Analytic, Spectral };

inline const char* to_string(Backend b) { return b == Backend::Analytic ? "analytic" : "spectral"; }

inline Backend parse_backend(const std::string& s, std::size_t line = 0) {
  if (s == "analytic") return Backend::Analytic;
  if (s == "spectral") return Backend::Spectral;
  throw ConfigError("backend must be 'analytic' or 'spectral', got '" + s + "'", line);
}

enum class StateKind { Eigen, Moving, Coefficients };

struct StateSpec {
  StateKind kind = StateKind::Eigen;
  int n = 1;
  /// Eigenbasis coefficients at t = 0 (kind = Coefficients), normalized on load.
  std::vector<cplx> coefficients;
  /// Discarded-norm tolerance when a moving-basis state is projected on the eigenbasis.
  double projection_tolerance = 1e-12;
};

struct DeltaJBlock {
  std::vector<double> x;
  std::vector<double> eps;
};

struct TailBlock {
  double threshold = 1e-10;
  std::vector<double> times;
  std::size_t max_terms = 20000;
};

struct BohmBlock {
  std::vector<double> x0;
  /// Size of the |psi|^2 ensemble used for the equivariance check (0 = skip).
  std::size_t samples = 0;
};

struct ProtocolBlock {
  double x_f = 0.0;
  double half_width = 0.0;
  double t_w = 0.0;
  double t_f = 0.0;
  PointerModel pointer;
  /// Ensemble size per run; 0 runs the calibration and reports at N*.
  std::uint64_t N = 0;
  std::size_t runs_per_bit = 400;
  double target = 0.01;
  std::vector<std::uint64_t> convergence_sizes;
  std::size_t repetitions = 200;
};

struct Fig2Block {
  double x_f = 2.27;
};

struct Scenario {
  WellModel model{WallMotion::fixed(1.0)};
  StateSpec state;
  Backend backend = Backend::Spectral;
  SolverConfig solver;
  ExactEvolveOptions exact;
  std::vector<double> times;
  std::vector<double> xs;
  std::uint64_t seed = 0;
  std::optional<DeltaJBlock> deltaj;
  std::optional<TailBlock> tail;
  std::optional<BohmBlock> bohm;
  std::optional<ProtocolBlock> protocol;
  std::optional<Fig2Block> fig2;
};

namespace detail {

inline std::vector<double> sample_axis(const IniFile& ini, const std::string& section) {
  if (ini.find(section, "list")) {
    if (ini.find(section, "start") || ini.find(section, "stop") || ini.find(section, "count"))
      throw ConfigError("[" + section + "] takes either 'list' or 'start/stop/count'", ini.section_line(section));
    return ini.get_list(section, "list");
  }
  const double a = ini.get_double(section, "start");
  const double b = ini.get_double(section, "stop");
  const long long n = ini.get_int(section, "count");
  if (n < 1) throw ConfigError("count must be >= 1", ini.line_of(section, "count"));
  if (n == 1) {
    if (a != b) throw ConfigError("count = 1 needs start == stop", ini.line_of(section, "count"));
    return {a};
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = b;
  return out;
}

inline void require_increasing(const std::vector<double>& v, const std::string& what, std::size_t line) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) throw ConfigError(what + " must be strictly increasing", line);
  }
}

inline std::size_t positive_size(const IniFile& ini, const std::string& s, const std::string& k, long long def) {
  const long long v = ini.get_int(s, k, def);
  if (v < 0) throw ConfigError("'" + k + "' must be non-negative", ini.line_of(s, k));
  return static_cast<std::size_t>(v);
}

inline WellModel parse_model(const IniFile& ini) {
  const std::string wall = ini.get_string("model", "wall");
  const double L0 = ini.get_double("model", "L0");
  const double mass = ini.get_double("model", "mass", 1.0);
  const double c = ini.get_double("model", "light_speed", kLightSpeedAu);
  const std::size_t line = ini.line_of("model", "wall");
  try {
    if (wall == "static") return WellModel(WallMotion::fixed(L0), mass, c);
    const double q = ini.get_double("model", "q");
    if (wall == "linear") return WellModel(WallMotion::linear(L0, q), mass, c);
    if (wall == "smoothed") return WellModel(WallMotion::smoothed(L0, q, ini.get_double("model", "gamma")), mass, c);
  } catch (const ConfigError&) {
    throw;
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what(), line);
  }
  throw ConfigError("wall must be 'static', 'linear' or 'smoothed', got '" + wall + "'", line);
}

inline StateSpec parse_state(const IniFile& ini) {
  StateSpec s;
  const std::string kind = ini.get_string("state", "kind");
  const std::size_t line = ini.line_of("state", "kind");
  s.projection_tolerance = ini.get_double("state", "projection_tolerance", 1e-12);
  if (kind == "eigen" || kind == "moving") {
    s.kind = kind == "eigen" ? StateKind::Eigen : StateKind::Moving;
    const long long n = ini.get_int("state", "n");
    if (n < 1 || n > 100000) throw ConfigError("state index n must lie in [1, 100000]", ini.line_of("state", "n"));
    s.n = static_cast<int>(n);
  } else if (kind == "coefficients") {
    s.kind = StateKind::Coefficients;
    const auto re = ini.get_list("state", "re");
    std::vector<double> im(re.size(), 0.0);
    if (ini.find("state", "im")) im = ini.get_list("state", "im");
    if (im.size() != re.size()) throw ConfigError("'re' and 'im' must have equal length", ini.line_of("state", "im"));
    double n2 = 0.0;
    for (std::size_t i = 0; i < re.size(); ++i) {
      s.coefficients.emplace_back(re[i], im[i]);
      n2 += std::norm(s.coefficients.back());
    }
    if (!(n2 > 0.0) || !std::isfinite(n2)) throw ConfigError("coefficient list does not normalize", ini.line_of("state", "re"));
    for (auto& c : s.coefficients) c /= std::sqrt(n2);
  } else {
    throw ConfigError("state kind must be 'eigen', 'moving' or 'coefficients', got '" + kind + "'", line);
  }
  return s;
}

inline SolverConfig parse_solver(const IniFile& ini) {
  SolverConfig c;
  c.K = positive_size(ini, "evolution", "K", 0);
  c.rtol = ini.get_double("evolution", "rtol", c.rtol);
  c.atol = ini.get_double("evolution", "atol", c.atol);
  c.norm_alarm = ini.get_double("evolution", "norm_alarm", c.norm_alarm);
  c.leak_threshold = ini.get_double("evolution", "leak_threshold", c.leak_threshold);
  c.max_K = positive_size(ini, "evolution", "max_K", static_cast<long long>(c.max_K));
  try {
    c.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what(), ini.section_line("evolution"));
  }
  return c;
}

}  // namespace detail

inline Scenario parse_scenario(const IniFile& ini) {
  Scenario sc;
  sc.model = detail::parse_model(ini);
  sc.state = detail::parse_state(ini);
  sc.backend = parse_backend(ini.get_string("evolution", "backend", "spectral"), ini.line_of("evolution", "backend"));
  sc.solver = detail::parse_solver(ini);
  sc.exact.tolerance = ini.get_double("evolution", "exact_tolerance", sc.exact.tolerance);

  sc.times = detail::sample_axis(ini, "times");
  detail::require_increasing(sc.times, "time grid", ini.line_of("times", "list"));
  if (!(sc.times.front() >= 0.0)) throw ConfigError("times must be non-negative", ini.section_line("times"));
  sc.xs = detail::sample_axis(ini, "space");
  detail::require_increasing(sc.xs, "spatial samples", ini.line_of("space", "list"));
  if (!(sc.xs.front() >= 0.0 && sc.xs.back() <= sc.model.L0()))
    throw ConfigError("spatial samples must lie in [0, L0]", ini.section_line("space"));

  const long long seed = ini.get_int("run", "seed", 0);
  if (seed < 0) throw ConfigError("seed must be non-negative", ini.line_of("run", "seed"));
  sc.seed = static_cast<std::uint64_t>(seed);

  if (ini.has_section("deltaj")) {
    DeltaJBlock b{ini.get_list("deltaj", "x"), ini.get_list("deltaj", "eps")};
    for (double e : b.eps) {
      if (!(e > 0.0)) throw ConfigError("eps values must be positive", ini.line_of("deltaj", "eps"));
    }
    sc.deltaj = b;
  }
  if (ini.has_section("tail")) {
    TailBlock b;
    b.threshold = ini.get_double("tail", "threshold", b.threshold);
    b.times = ini.get_list("tail", "times");
    b.max_terms = detail::positive_size(ini, "tail", "max_terms", static_cast<long long>(b.max_terms));
    sc.tail = b;
  }
  if (ini.has_section("bohm")) {
    BohmBlock b;
    b.x0 = ini.get_list("bohm", "x0");
    b.samples = detail::positive_size(ini, "bohm", "samples", 0);
    sc.bohm = b;
  }
  if (ini.has_section("protocol")) {
    ProtocolBlock p;
    p.x_f = ini.get_double("protocol", "x_f");
    p.half_width = ini.get_double("protocol", "half_width");
    p.t_w = ini.get_double("protocol", "t_w");
    p.t_f = ini.get_double("protocol", "t_f");
    p.pointer.g = ini.get_double("protocol", "g");
    p.pointer.s = ini.get_double("protocol", "s");
    p.pointer.weakness_bound = ini.get_double("protocol", "weakness_bound", p.pointer.weakness_bound);
    p.N = detail::positive_size(ini, "protocol", "N", 0);
    p.runs_per_bit = detail::positive_size(ini, "protocol", "runs_per_bit", 400);
    p.target = ini.get_double("protocol", "target", p.target);
    if (ini.find("protocol", "convergence_sizes")) {
      for (double v : ini.get_list("protocol", "convergence_sizes")) {
        if (!(v >= 1.0) || v != std::floor(v))
          throw ConfigError("convergence sizes must be positive integers", ini.line_of("protocol", "convergence_sizes"));
        p.convergence_sizes.push_back(static_cast<std::uint64_t>(v));
      }
    }
    p.repetitions = detail::positive_size(ini, "protocol", "repetitions", 200);
    if (p.runs_per_bit < 1) throw ConfigError("runs_per_bit must be >= 1", ini.line_of("protocol", "runs_per_bit"));
    sc.protocol = p;
  }
  if (ini.has_section("fig2")) sc.fig2 = Fig2Block{ini.get_double("fig2", "x_f", 2.27)};

  if (sc.backend == Backend::Analytic && !sc.model.wall().is_linear())
    throw ConfigError("backend 'analytic' requires a linear wall", ini.line_of("evolution", "backend"));
  if (sc.state.kind == StateKind::Moving && !sc.model.wall().is_linear())
    throw ConfigError("moving-basis initial states require a linear wall", ini.line_of("state", "kind"));

  ini.reject_unused();
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  return parse_scenario(IniFile::parse(in));
}

// ---------------------------------------------------------------------------
// Building states and evolutions
// ---------------------------------------------------------------------------

/// Eigenbasis coefficients at t = 0 of psi_n(x, 0) of `source`, with the
/// truncation grown until the discarded norm is below `tolerance`.
inline std::vector<cplx> project_moving_state(int n, const WellModel& source, double tolerance, std::size_t max_terms) {
  std::size_t K = std::max<std::size_t>(default_truncation(source, 0.0), static_cast<std::size_t>(2 * n));
  while (true) {
    auto a = eigen_coefficients_of_psi(n, 0.0, source, K);
    double kept = 0.0;
    for (const auto& c : a) kept += std::norm(c);
    if (1.0 - kept < tolerance) return a;
    if (K >= max_terms) throw NumericalAlarm("truncation_unreachable", "projection of the moving-basis state did not converge");
    K = std::min(max_terms, K + K / 2);
  }
}

/// Initial state at t = 0 on `model`. Moving-basis states use `chirp_source`
/// for their x^2 phase (the scenario model unless a static copy is evolved).
inline WaveState initial_state(const Scenario& sc, const WellModel& model, bool eigenbasis,
                               const WellModel* chirp_source = nullptr) {
  const WellModel& src = chirp_source ? *chirp_source : model;
  switch (sc.state.kind) {
    case StateKind::Eigen:
      return eigen_state(sc.state.n, 0.0, model);
    case StateKind::Coefficients:
      return WaveState::normalized(model, 0.0, Basis::InstantaneousEigen, sc.state.coefficients);
    case StateKind::Moving:
      if (!eigenbasis && &src == &model) return moving_basis_state(sc.state.n, 0.0, model);
      return WaveState::normalized(model, 0.0, Basis::InstantaneousEigen,
                                   project_moving_state(sc.state.n, src, sc.state.projection_tolerance, sc.solver.max_K));
  }
  throw PreconditionError("unknown state kind");
}

inline std::unique_ptr<StateEvolution> make_evolution(const Scenario& sc, const WellModel& model, Backend backend,
                                                      double t_max, const WellModel* chirp_source = nullptr) {
  if (backend == Backend::Analytic) {
    if (!model.wall().is_linear()) throw ConfigError("backend 'analytic' requires a linear wall");
    return std::make_unique<AnalyticEvolution>(initial_state(sc, model, false, chirp_source), sc.exact);
  }
  const WaveState init = initial_state(sc, model, true, chirp_source);
  if (model.wall().is_static()) return std::make_unique<StationaryEvolution>(init);
  return std::make_unique<SpectralEvolution>(init, t_max, sc.solver);
}

}  // namespace mwell::io
