#pragma once

// Subcommand bodies. Each returns the complete set of output files; nothing
// touches the filesystem until the caller writes the bundle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mwell/mwell.hpp"
#include "mwell/io/output.hpp"
#include "mwell/io/scenario.hpp"

namespace mwell::io {

struct RunFlags {
  std::optional<std::uint64_t> seed;
  std::optional<Backend> backend;
  unsigned threads = 1;
};

inline Scenario apply_flags(Scenario sc, const RunFlags& f) {
  if (f.seed) sc.seed = *f.seed;
  if (f.backend) {
    if (*f.backend == Backend::Analytic && !sc.model.wall().is_linear())
      throw ConfigError("backend 'analytic' requires a linear wall");
    sc.backend = *f.backend;
  }
  return sc;
}

namespace detail {

inline Json model_json(const WellModel& m) {
  Json j;
  j["wall"] = m.wall().name();
  j["L0"] = m.L0();
  j["q"] = m.wall().is_static() ? 0.0 : m.wall().speed();
  j["mass"] = m.mass();
  j["light_speed"] = m.light_speed();
  return j;
}

inline Json header_json(const Scenario& sc, const std::string& command) {
  Json j;
  j["command"] = command;
  j["units"] = "au";
  j["model"] = model_json(sc.model);
  j["backend"] = to_string(sc.backend);
  j["seed"] = sc.seed;
  return j;
}

inline Json tail_json(const TailReport& r) {
  Json j;
  j["t"] = r.t;
  j["threshold"] = r.threshold;
  j["k_cut"] = r.k_cut;
  j["discarded"] = r.discarded;
  j["double_projection"] = r.double_projection;
  j["inner_terms"] = r.inner_terms;
  j["inner_discarded"] = r.inner_discarded;
  j["velocity"] = r.velocity;
  j["velocity_over_c"] = r.velocity_over_c;
  return j;
}

inline Json run_json(const ProtocolRun& r) {
  Json j;
  j["bit"] = r.bit;
  j["N"] = r.N;
  j["seed"] = r.seed;
  j["run_id"] = r.run_id;
  j["postselected"] = r.postselected;
  j["reading_mean"] = r.reading_mean;
  j["momentum_mean"] = r.momentum_mean;
  j["estimate"] = r.estimate;
  j["im_estimate"] = r.im_estimate;
  j["decision"] = r.decision;
  j["error"] = r.error;
  j["t_weak"] = r.t_weak;
  j["t_acquire"] = r.t_acquire;
  j["t_signal"] = r.t_signal;
  j["before_light_cone"] = r.before_light_cone;
  return j;
}

inline Json error_rate_json(const ErrorRate& e) {
  Json j;
  j["N"] = e.N;
  j["trials"] = e.trials;
  j["errors"] = Json::array({e.errors[0], e.errors[1]});
  j["rate"] = e.rate();
  j["upper_95"] = e.upper();
  return j;
}

inline double max_time(const Scenario& sc) { return sc.times.back(); }

/// Samples inside (0, L(t)) only; wall points carry no guarded quotient.
inline bool inside_well(double x, double L) { return x > 0.0 && x < L; }

}  // namespace detail

// ---------------------------------------------------------------------------
// evolve
// ---------------------------------------------------------------------------

inline OutputBundle command_evolve(const Scenario& sc) {
  const auto evo = make_evolution(sc, sc.model, sc.backend, detail::max_time(sc));
  CsvSeries re(sc.model), im(sc.model);
  Json snaps = Json::array();
  for (double t : sc.times) {
    const WaveState s = evo->state_at(t);
    const SeriesView view(s);
    for (double x : sc.xs) {
      if (x > s.length()) continue;
      const cplx psi = view.psi(x);
      re.add(t, x, psi.real());
      im.add(t, x, psi.imag());
    }
    Json snap;
    snap["t"] = t;
    snap["basis"] = to_string(s.basis());
    snap["L"] = s.length();
    snap["norm2"] = s.norm2();
    Json c = Json::array();
    for (const auto& v : s.coefficients()) c.push_back(complex_json(v));
    snap["coefficients"] = std::move(c);
    snaps.push_back(std::move(snap));
  }
  Json summary = detail::header_json(sc, "evolve");
  if (const auto* sp = dynamic_cast<const SpectralEvolution*>(evo.get())) summary["truncation"] = sp->truncation();
  summary["snapshots"] = std::move(snaps);
  OutputBundle out;
  out.add("evolve_re_psi.csv", re.text());
  out.add("evolve_im_psi.csv", im.text());
  out.add_json("evolve.json", summary);
  return out;
}

// ---------------------------------------------------------------------------
// observables
// ---------------------------------------------------------------------------

inline OutputBundle command_observables(const Scenario& sc) {
  const auto evo = make_evolution(sc, sc.model, sc.backend, detail::max_time(sc));
  CsvSeries rho(sc.model), j(sc.model), v(sc.model), re_pw(sc.model), im_pw(sc.model), q(sc.model);
  for (double t : sc.times) {
    const StateProbe probe(evo->state_at(t));
    const double L = sc.model.length(t);
    for (double x : sc.xs) {
      if (x > L) continue;
      const double r = probe.density(x);
      rho.add(t, x, r);
      j.add(t, x, probe.current(x));
      if (!detail::inside_well(x, L) || probe.guarded(r)) {
        v.add(t, x, std::nullopt);
        re_pw.add(t, x, std::nullopt);
        im_pw.add(t, x, std::nullopt);
        q.add(t, x, std::nullopt);
        continue;
      }
      const cplx pw = probe.weak_momentum(x);
      v.add(t, x, pw.real() / sc.model.mass());
      re_pw.add(t, x, pw.real());
      im_pw.add(t, x, pw.imag());
      q.add(t, x, probe.quantum_potential(x));
    }
  }
  OutputBundle out;
  out.add("observables_rho.csv", rho.text());
  out.add("observables_j.csv", j.text());
  out.add("observables_v.csv", v.text());
  out.add("observables_re_pw.csv", re_pw.text());
  out.add("observables_im_pw.csv", im_pw.text());
  out.add("observables_q.csv", q.text());
  return out;
}

// ---------------------------------------------------------------------------
// deltaj
// ---------------------------------------------------------------------------

struct DeltaJSweep {
  std::vector<double> x;
  std::vector<double> eps;
  /// values[i][k] = Delta j(x_i, eps_k).
  std::vector<std::vector<double>> values;
  std::vector<double> slope_limit;
};

inline DeltaJSweep delta_j_sweep(const StateEvolution& evo, const std::vector<double>& xs, const std::vector<double>& eps) {
  DeltaJSweep s{xs, eps, {}, {}};
  const double t0 = evo.initial_time();
  const StateProbe p0(evo.state_at(t0));
  std::vector<StateProbe> p1;
  for (double e : eps) p1.emplace_back(evo.state_at(t0 + e));
  for (double x : xs) {
    std::vector<double> row, ratio;
    const double j0 = p0.current(x);
    for (std::size_t k = 0; k < eps.size(); ++k) {
      row.push_back(p1[k].current(x) - j0);
      ratio.push_back(row.back() / eps[k]);
    }
    s.slope_limit.push_back(richardson_limit(eps, ratio));
    s.values.push_back(std::move(row));
  }
  return s;
}

inline OutputBundle command_deltaj(const Scenario& sc) {
  if (!sc.deltaj) throw ConfigError("deltaj needs a [deltaj] section");
  const auto& blk = *sc.deltaj;
  const double t_max = *std::max_element(blk.eps.begin(), blk.eps.end());
  const auto evo = make_evolution(sc, sc.model, sc.backend, t_max);
  const auto sweep = delta_j_sweep(*evo, blk.x, blk.eps);
  CsvSeries csv(sc.model);
  Json rows = Json::array();
  const bool closed = sc.state.kind != StateKind::Coefficients && !sc.model.wall().is_static();
  for (std::size_t i = 0; i < blk.x.size(); ++i) {
    for (std::size_t k = 0; k < blk.eps.size(); ++k) csv.add(blk.eps[k], blk.x[i], sweep.values[i][k]);
    Json r;
    r["x"] = blk.x[i];
    r["delta_j"] = sweep.values[i];
    r["slope_limit"] = sweep.slope_limit[i];
    if (closed) {
      const double ref = delta_j_slope_psi(sc.state.n, blk.x[i], sc.model);
      r["slope_small_x"] = ref;
      r["relative_deviation"] = (sweep.slope_limit[i] - ref) / std::abs(ref);
    }
    rows.push_back(std::move(r));
  }
  Json summary = detail::header_json(sc, "deltaj");
  summary["eps"] = blk.eps;
  summary["points"] = std::move(rows);
  OutputBundle out;
  out.add("deltaj.csv", csv.text());
  out.add_json("deltaj.json", summary);
  return out;
}

// ---------------------------------------------------------------------------
// tail
// ---------------------------------------------------------------------------

inline OutputBundle command_tail(const Scenario& sc) {
  if (!sc.tail) throw ConfigError("tail needs a [tail] section");
  if (!sc.model.wall().is_linear()) throw ConfigError("tail reports require a linear wall");
  const WaveState init = initial_state(sc, sc.model, true);
  TailOptions opt;
  opt.max_terms = sc.tail->max_terms;
  const double t_light = sc.model.L0() / sc.model.light_speed();
  Json reports = Json::array();
  for (double t : sc.tail->times) {
    const TailReport r = tail_report(init, t, sc.tail->threshold, opt);
    Json j = detail::tail_json(r);
    const double v_light = eigen_velocity(static_cast<int>(r.k_cut), t_light, sc.model);
    j["velocity_over_c_at_light_cone"] = v_light / sc.model.light_speed();
    reports.push_back(std::move(j));
  }
  Json summary = detail::header_json(sc, "tail");
  summary["light_cone_time"] = t_light;
  summary["reports"] = std::move(reports);
  OutputBundle out;
  out.add_json("tail.json", summary);
  return out;
}

// ---------------------------------------------------------------------------
// bohm
// ---------------------------------------------------------------------------

/// Uniforms in [0, 1) from a dedicated stream of the scenario seed.
inline std::vector<double> seeded_uniforms(std::uint64_t seed, std::size_t n) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xB0u};
  std::mt19937_64 eng(seq);
  std::vector<double> u(n);
  for (auto& v : u) v = static_cast<double>(eng() >> 11) * 0x1.0p-53;
  return u;
}

inline OutputBundle command_bohm(const Scenario& sc) {
  if (!sc.bohm) throw ConfigError("bohm needs a [bohm] section");
  const auto evo = make_evolution(sc, sc.model, sc.backend, detail::max_time(sc));
  const double t0 = evo->initial_time();
  std::vector<double> times;
  for (double t : sc.times) {
    if (t > t0) times.push_back(t);
  }
  if (times.empty()) throw ConfigError("bohm needs output times after the initial time");
  CsvSeries xcsv(sc.model), vcsv(sc.model), qcsv(sc.model);
  Json trajs = Json::array();
  for (double x0 : sc.bohm->x0) {
    const Trajectory tr = integrate_trajectory(x0, *evo, times);
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
      xcsv.add(tr.t[i], x0, tr.x[i]);
      vcsv.add(tr.t[i], tr.x[i], tr.v[i]);
      qcsv.add(tr.t[i], tr.x[i], tr.Q[i]);
    }
    Json j;
    j["x0"] = x0;
    j["t"] = tr.t;
    j["x"] = tr.x;
    j["v"] = tr.v;
    j["Q"] = tr.Q;
    trajs.push_back(std::move(j));
  }
  Json summary = detail::header_json(sc, "bohm");
  summary["trajectories"] = std::move(trajs);
  if (sc.bohm->samples > 0) {
    const auto u = seeded_uniforms(sc.seed, sc.bohm->samples);
    const auto x0 = sample_density(evo->state_at(t0), u);
    const double t1 = times.back();
    const double t_out[] = {t1};
    const auto rows = transport_ensemble(x0, *evo, t_out);
    const DensityCdf cdf(evo->state_at(t1));
    Json eq;
    eq["samples"] = sc.bohm->samples;
    eq["t"] = t1;
    eq["ks_distance"] = ks_distance(rows.front(), cdf);
    summary["equivariance"] = std::move(eq);
  }
  OutputBundle out;
  out.add("bohm_x.csv", xcsv.text());
  out.add("bohm_v.csv", vcsv.text());
  out.add("bohm_q.csv", qcsv.text());
  out.add_json("bohm.json", summary);
  return out;
}

// ---------------------------------------------------------------------------
// protocol
// ---------------------------------------------------------------------------

struct ProtocolSetup {
  std::unique_ptr<StateEvolution> resting;
  std::unique_ptr<StateEvolution> moving;
  ProtocolDesign design;
};

inline ProtocolSetup prepare_protocol(const Scenario& sc) {
  if (!sc.protocol) throw ConfigError("protocol needs a [protocol] section");
  if (sc.model.wall().is_static()) throw ConfigError("protocol: the moving cavity needs a moving wall");
  const auto& p = *sc.protocol;
  ProtocolSetup s;
  const WellModel rest(WallMotion::fixed(sc.model.L0()), sc.model.mass(), sc.model.light_speed());
  s.resting = make_evolution(sc, rest, Backend::Spectral, p.t_f, &sc.model);
  s.moving = make_evolution(sc, sc.model, sc.backend, p.t_f);
  s.design = design_protocol(*s.resting, *s.moving, p.pointer, {p.x_f, p.half_width}, p.t_w, p.t_f);
  return s;
}

inline OutputBundle command_protocol(const Scenario& sc, unsigned threads) {
  const auto setup = prepare_protocol(sc);
  const auto& d = setup.design;
  const auto& p = *sc.protocol;
  Json summary = detail::header_json(sc, "protocol");
  Json design;
  design["x_f"] = d.window.x_f;
  design["half_width"] = d.window.half_width;
  design["t_w"] = d.t_w;
  design["t_f"] = d.t_f;
  design["t_signal"] = d.t_signal;
  design["g"] = d.pointer.g;
  design["s"] = d.pointer.s;
  design["weakness_bound"] = d.pointer.weakness_bound;
  design["threshold"] = d.threshold();
  Json ch = Json::array();
  for (const auto& c : d.channel) {
    Json j;
    j["p_ps"] = c.p_ps;
    j["weak_momentum"] = complex_json(c.weak_momentum);
    ch.push_back(std::move(j));
  }
  design["channels"] = std::move(ch);
  summary["design"] = std::move(design);

  std::uint64_t N = p.N;
  if (N == 0) {
    CalibrationOptions co;
    co.target = p.target;
    co.runs_per_bit = p.runs_per_bit;
    co.threads = threads;
    const Calibration cal = calibrate_ensemble_size(d, sc.seed, co);
    Json cj;
    cj["target"] = cal.target;
    cj["N_star"] = cal.N_star;
    cj["at_N_star"] = detail::error_rate_json(cal.at_N_star);
    Json hist = Json::array();
    for (const auto& e : cal.history) hist.push_back(detail::error_rate_json(e));
    cj["history"] = std::move(hist);
    summary["calibration"] = std::move(cj);
    N = cal.N_star;
  } else {
    summary["error_rate"] = detail::error_rate_json(bit_error_rate(d, N, p.runs_per_bit, sc.seed, 0, threads));
  }

  // One reported run per bit, on run ids disjoint from the batches above.
  const std::uint64_t report_id = std::uint64_t{1} << 40;
  Json runs = Json::array();
  bool guard = true;
  for (int bit = 0; bit < 2; ++bit) {
    const auto r = run_protocol(d, bit, N, sc.seed, {report_id, false, threads});
    guard = guard && r.before_light_cone && r.t_acquire < r.t_signal && r.t_weak < r.t_signal;
    runs.push_back(detail::run_json(r));
  }
  summary["runs"] = std::move(runs);
  summary["timing_guard"] = guard;

  if (!p.convergence_sizes.empty()) {
    const auto c = estimator_convergence(d, 1, p.convergence_sizes, p.repetitions, sc.seed, threads);
    Json cj;
    Json pts = Json::array();
    for (const auto& pt : c.points) {
      Json j;
      j["n_postselected"] = pt.n_postselected;
      j["rms_error"] = pt.rms_error;
      pts.push_back(std::move(j));
    }
    cj["points"] = std::move(pts);
    cj["slope"] = c.slope;
    summary["convergence"] = std::move(cj);
  }
  OutputBundle out;
  out.add_json("protocol.json", summary);
  return out;
}

// ---------------------------------------------------------------------------
// fig1 / fig2
// ---------------------------------------------------------------------------

struct Fig1Point {
  double t = 0.0;
  double x = 0.0;
  std::optional<double> abs_re_pw;
  bool inside = false;
};

/// |Re P^w| over the (t, x) lattice of the scenario; guarded points are empty.
inline std::vector<Fig1Point> fig1_lattice(const Scenario& sc) {
  const auto evo = make_evolution(sc, sc.model, sc.backend, detail::max_time(sc));
  std::vector<Fig1Point> pts;
  for (double t : sc.times) {
    const StateProbe probe(evo->state_at(t));
    const double L = sc.model.length(t);
    for (double x : sc.xs) {
      if (x > L) continue;
      Fig1Point p{t, x, std::nullopt, x >= sc.model.L0() || t >= (sc.model.L0() - x) / sc.model.light_speed()};
      if (detail::inside_well(x, L) && !probe.guarded(probe.density(x)))
        p.abs_re_pw = std::abs(probe.weak_momentum(x).real());
      pts.push_back(p);
    }
  }
  return pts;
}

inline OutputBundle command_fig1(const Scenario& sc) {
  const auto pts = fig1_lattice(sc);
  CsvSeries csv(sc.model);
  std::size_t outside = 0, above = 0;
  for (const auto& p : pts) {
    csv.add(p.t, p.x, p.abs_re_pw);
    if (!p.inside && p.abs_re_pw) {
      ++outside;
      if (*p.abs_re_pw > 1e-6) ++above;
    }
  }
  Json summary = detail::header_json(sc, "fig1");
  summary["points_before_light_cone"] = outside;
  summary["points_above_1e-6"] = above;
  summary["fraction_above_1e-6"] = outside ? static_cast<double>(above) / static_cast<double>(outside) : 0.0;
  OutputBundle out;
  out.add("fig1.csv", csv.text());
  out.add_json("fig1.json", summary);
  return out;
}

struct Fig2Series {
  double x_f = 0.0;
  std::vector<double> t;
  std::vector<std::optional<double>> moving;
  std::vector<std::optional<double>> resting;
  /// m q x_f / L(t).
  std::vector<double> reference;
};

inline Fig2Series fig2_series(const Scenario& sc) {
  if (!sc.model.wall().is_linear()) throw ConfigError("fig2 requires a linear wall");
  Fig2Series f;
  f.x_f = sc.fig2 ? sc.fig2->x_f : 2.27;
  const double t_max = detail::max_time(sc);
  const auto moving = make_evolution(sc, sc.model, sc.backend, t_max);
  const WellModel rest(WallMotion::fixed(sc.model.L0()), sc.model.mass(), sc.model.light_speed());
  const auto resting = make_evolution(sc, rest, Backend::Spectral, t_max, &sc.model);
  auto sample = [&](const StateEvolution& e, double t) -> std::optional<double> {
    const StateProbe probe(e.state_at(t));
    if (probe.guarded(probe.density(f.x_f))) return std::nullopt;
    return probe.weak_momentum(f.x_f).real();
  };
  for (double t : sc.times) {
    f.t.push_back(t);
    f.moving.push_back(sample(*moving, t));
    f.resting.push_back(sample(*resting, t));
    f.reference.push_back(sc.model.mass() * sc.model.wall().speed() * f.x_f / sc.model.length(t));
  }
  return f;
}

inline OutputBundle command_fig2(const Scenario& sc) {
  const auto f = fig2_series(sc);
  CsvSeries mv(sc.model), st(sc.model);
  double dev_moving = 0.0, dev_static = 0.0;
  for (std::size_t i = 0; i < f.t.size(); ++i) {
    mv.add(f.t[i], f.x_f, f.moving[i]);
    st.add(f.t[i], f.x_f, f.resting[i]);
    if (f.moving[i]) dev_moving = std::max(dev_moving, std::abs(*f.moving[i] - f.reference[i]));
    if (f.resting[i]) dev_static = std::max(dev_static, std::abs(*f.resting[i] - f.reference[i]));
  }
  Json summary = detail::header_json(sc, "fig2");
  summary["x_f"] = f.x_f;
  summary["max_deviation_moving"] = dev_moving;
  summary["max_deviation_static"] = dev_static;
  OutputBundle out;
  out.add("fig2_moving.csv", mv.text());
  out.add("fig2_static.csv", st.text());
  out.add_json("fig2.json", summary);
  return out;
}

inline OutputBundle run_command(const std::string& name, const Scenario& sc, unsigned threads) {
  if (name == "evolve") return command_evolve(sc);
  if (name == "observables") return command_observables(sc);
  if (name == "deltaj") return command_deltaj(sc);
  if (name == "tail") return command_tail(sc);
  if (name == "bohm") return command_bohm(sc);
  if (name == "protocol") return command_protocol(sc, threads);
  if (name == "fig1") return command_fig1(sc);
  if (name == "fig2") return command_fig2(sc);
  throw ConfigError("unknown subcommand '" + name + "'");
}

}  // namespace mwell::io
