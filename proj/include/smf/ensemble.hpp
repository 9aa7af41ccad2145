#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "smf/errors.hpp"
#include "smf/lindblad.hpp"
#include "smf/meanfield.hpp"
#include "smf/model.hpp"
#include "smf/rng.hpp"
#include "smf/smf_pair.hpp"

namespace smf {

enum class Scheme { kTdhf, kSmfPair, kLindbladDet, kLindbladJump };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kTdhf: return "tdhf";
    case Scheme::kSmfPair: return "smf-pair";
    case Scheme::kLindbladDet: return "lindblad-det";
    case Scheme::kLindbladJump: return "lindblad-jump";
  }
  return "?";
}

struct TrajectoryConfig {
  Scheme scheme = Scheme::kTdhf;
  double dt = 0.1;          // fm/c
  double t_end = 300.0;     // fm/c
  int stride = 10;          // steps between outputs
  int n_traj = 200;
  std::uint64_t seed = 42;
  bool keep_constraint = false;  // keep the x^2 constraint during dynamics

  int n_steps() const {
    return static_cast<int>(std::llround(t_end / dt));
  }

  void validate(const ModelSpec& model) const {
    if (n_traj < 1) throw ConfigError("run.n_traj: must be >= 1");
    if (stride < 1) throw ConfigError("run.stride: must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("run.dt: must be > 0");
    if (!(t_end > 0.0)) throw ConfigError("run.t_end: must be > 0");
    if (model.kind == ModelKind::kGrid1D && dt > model.dt_stability_bound())
      throw ConfigError("run.dt: exceeds stability bound " +
                        std::to_string(model.dt_stability_bound()));
    const int ns = n_steps();
    if (std::abs(ns * dt - t_end) > 1e-9 * std::max(1.0, t_end))
      throw ConfigError("run.t_end: must be an integer number of steps");
    if (ns % stride != 0)
      throw ConfigError("run.stride: must divide the step count evenly");
  }
};

// Per-path output-time series.  A trajectory that aborts is excluded from
// the statistics entirely and only counted.
struct TrajectoryRecord {
  std::vector<double> msr;        // <x^2> per particle, fm^2
  std::vector<double> rms;        // fm
  std::vector<double> entropy;    // dimensionless
  std::vector<double> trace_defect;
  std::vector<double> idem_defect;
  std::vector<double> overlap_defect;
  bool aborted = false;
  std::string abort_reason;
};

struct TimePoint {
  double t = 0.0;
  double mean_rms = 0.0;
  double delta_r = 0.0;       // std of <x^2> across paths, fm^2
  double se_msr = 0.0;        // standard error of mean <x^2>
  double se_rms = 0.0;        // standard error of mean rms
  double mean_msr = 0.0;
  double mean_entropy = 0.0;
  double max_trace_defect = 0.0;
  double max_idem_defect = 0.0;
  double max_overlap_defect = 0.0;
  int n_alive = 0;
};

struct FitResult {
  double delta0 = 0.0;
  double gamma0 = 0.0;
  double r2 = 1.0;
};

struct EnsembleStats {
  std::vector<TimePoint> series;
  int n_traj = 0;
  int n_aborted = 0;
  double sigma_mf = 0.0;  // quantal std of <x^2> in the initial state, fm^2
  FitResult fit;
};

// --- Saturation fit ---------------------------------------------------------

namespace detail {

inline double sse_saturation(const std::vector<double>& t,
                             const std::vector<double>& y, double d0,
                             double g0) {
  double sse = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double f = d0 * (1.0 - std::exp(-g0 * t[i]));
    sse += (y[i] - f) * (y[i] - f);
  }
  return sse;
}

/// Golden-section minimization of f over [lo, hi].
template <typename F>
double golden_min(F f, double lo, double hi, int iters = 60) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d; d = c; fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// Fit y(t) = Delta0 (1 - exp(-Gamma0 t)) by least squares: a coarse
/// Delta0 x Gamma0 grid scan followed by three alternating golden-section
/// sweeps.  Returns the parameters and R^2.
inline FitResult fit_saturation(const std::vector<double>& t,
                                const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 20)
    throw ConfigError("fit_saturation: need >= 20 samples");
  if (std::abs(t.front()) > 1e-12)
    throw ConfigError("fit_saturation: series must start at t = 0");
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(t[i]) || !std::isfinite(y[i]))
      throw NumericalError("fit_saturation: non-finite input");

  const double ymax = *std::max_element(y.begin(), y.end());
  const double t_max = t.back();
  FitResult out;
  if (ymax <= 0.0) return out;  // flat series: Delta0 = Gamma0 = 0, R^2 = 1

  // Coarse scan.
  double best_sse = std::numeric_limits<double>::infinity();
  double best_d0 = ymax, best_g0 = 1.0 / t_max;
  for (int i = 0; i < 40; ++i) {
    const double d0 = ymax * (0.25 + 2.25 * i / 39.0);
    for (int j = 0; j < 40; ++j) {
      const double g0 = std::pow(10.0, -3.0 + 5.0 * j / 39.0) / t_max;
      const double sse = detail::sse_saturation(t, y, d0, g0);
      if (sse < best_sse) { best_sse = sse; best_d0 = d0; best_g0 = g0; }
    }
  }

  // Alternating 1D refinements.
  for (int sweep = 0; sweep < 3; ++sweep) {
    best_d0 = detail::golden_min(
        [&](double d) { return detail::sse_saturation(t, y, d, best_g0); },
        0.5 * best_d0, 2.0 * best_d0);
    best_g0 = detail::golden_min(
        [&](double g) { return detail::sse_saturation(t, y, best_d0, g); },
        0.25 * best_g0, 4.0 * best_g0);
  }

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= y.size();
  double sst = 0.0;
  for (double v : y) sst += (v - mean) * (v - mean);
  const double sse = detail::sse_saturation(t, y, best_d0, best_g0);

  out.delta0 = best_d0;
  out.gamma0 = best_g0;
  out.r2 = sst > 0.0 ? 1.0 - sse / sst : 1.0;
  return out;
}

// --- Ensemble driver ---------------------------------------------------------

namespace detail {

struct Kahan {
  double sum = 0.0, c = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      c += (sum - t) + v;
    else
      c += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

/// Observables and invariant defects of the current one-body density.
inline void record_point(TrajectoryRecord& rec, const MatC& rho,
                         bool hermitian, double max_trace_defect_window,
                         double max_overlap_defect_window,
                         const ModelSpec& model) {
  const double msr = mean_square_radius(rho, model);
  rec.msr.push_back(msr);
  rec.rms.push_back(std::sqrt(msr));
  rec.entropy.push_back(one_body_entropy(rho, hermitian));
  rec.trace_defect.push_back(max_trace_defect_window);
  rec.idem_defect.push_back(idempotency_defect(rho));
  rec.overlap_defect.push_back(max_overlap_defect_window);
}

}  // namespace detail

struct RunInputs {
  ModelSpec model;
  TrajectoryConfig traj;
  ResidualEnsemble ensemble;           // for the pair scheme
  std::optional<PHInteraction> interaction;  // for the dissipative schemes
};

/// One trajectory, fully determined by (inputs, trajectory id).
inline TrajectoryRecord run_trajectory(const RunInputs& in,
                                       const SlaterState& init,
                                       std::uint64_t traj_id) {
  const ModelSpec& model = in.model;
  const TrajectoryConfig& cfg = in.traj;
  const CounterRng rng(cfg.seed, traj_id);
  const bool constraint = cfg.keep_constraint;
  const int n_steps = cfg.n_steps();
  const double n_expected = model.n_particles;

  TrajectoryRecord rec;
  rec.msr.reserve(n_steps / cfg.stride + 1);

  try {
    switch (cfg.scheme) {
      case Scheme::kTdhf:
      case Scheme::kLindbladJump: {
        SlaterState state = init;
        double w_trace = 0.0, w_overlap = 0.0;
        detail::record_point(rec, state.density(), true, 0.0, 0.0, model);
        for (int s = 0; s < n_steps; ++s) {
          state = cfg.scheme == Scheme::kTdhf
                      ? tdhf_step(state, model, cfg.dt, constraint)
                      : unravel_step(state, *in.interaction, model, cfg.dt,
                                     rng, static_cast<std::uint64_t>(s),
                                     constraint);
          const double od = orthonormality_defect(state.orbitals);
          const double td =
              std::abs(state.orbitals.squaredNorm() - n_expected);
          if (od > 1e-8)
            throw TrajectoryAbort("orthonormality defect " + std::to_string(od));
          if (td > 1e-10)
            throw TrajectoryAbort("trace defect " + std::to_string(td));
          w_overlap = std::max(w_overlap, od);
          w_trace = std::max(w_trace, td);
          if ((s + 1) % cfg.stride == 0) {
            detail::record_point(rec, state.density(), true, w_trace,
                                 w_overlap, model);
            w_trace = w_overlap = 0.0;
          }
        }
        break;
      }
      case Scheme::kSmfPair: {
        BiorthogonalPair pair = BiorthogonalPair::from_slater(init);
        double w_trace = 0.0, w_overlap = 0.0;
        detail::record_point(rec, pair.density(), pair.self_dual, 0.0, 0.0,
                             model);
        for (int s = 0; s < n_steps; ++s) {
          const NoiseDraw noise = make_noise_draw(
              rng, static_cast<std::uint64_t>(s), in.ensemble, model, cfg.dt);
          pair = pair_step(pair, noise, in.ensemble, model, cfg.dt, constraint);
          const double od = biorthogonality_defect(pair);
          double td;
          if (pair.self_dual) {
            td = std::abs(pair.kets.squaredNorm() - n_expected);
          } else {
            cxd tr = 0.0;
            for (int j = 0; j < pair.n(); ++j)
              tr += (pair.duals.row(j) * pair.kets.col(j)).value();
            td = std::abs(tr - cxd(n_expected, 0.0));
          }
          if (od > 1e-8)
            throw TrajectoryAbort("biorthogonality defect " + std::to_string(od));
          if (td > 1e-10)
            throw TrajectoryAbort("trace defect " + std::to_string(td));
          w_overlap = std::max(w_overlap, od);
          w_trace = std::max(w_trace, td);
          if ((s + 1) % cfg.stride == 0) {
            detail::record_point(rec, pair.density(), pair.self_dual, w_trace,
                                 w_overlap, model);
            w_trace = w_overlap = 0.0;
          }
        }
        break;
      }
      case Scheme::kLindbladDet: {
        MatC rho = init.density();
        detail::record_point(rec, rho, true, 0.0, 0.0, model);
        double w_trace = 0.0;
        for (int s = 0; s < n_steps; ++s) {
          rho = lindblad_step(rho, *in.interaction, model, cfg.dt, constraint);
          const double td = std::abs(rho.trace().real() - n_expected);
          if (td > 1e-10)
            throw TrajectoryAbort("trace defect " + std::to_string(td));
          w_trace = std::max(w_trace, td);
          if ((s + 1) % cfg.stride == 0) {
            detail::record_point(rec, rho, true, w_trace, 0.0, model);
            w_trace = 0.0;
          }
        }
        break;
      }
    }
  } catch (const TrajectoryAbort& e) {
    rec.aborted = true;
    rec.abort_reason = e.what();
  }
  return rec;
}

/// Run the whole ensemble.  Trajectories are independent and may execute on
/// any number of threads; the reduction runs afterwards in trajectory order
/// with compensated sums, so the output is bit-identical for any schedule.
inline EnsembleStats run_ensemble(const RunInputs& in, int n_threads = 0) {
  in.model.validate();
  in.traj.validate(in.model);
  if ((in.traj.scheme == Scheme::kLindbladDet ||
       in.traj.scheme == Scheme::kLindbladJump) &&
      !in.interaction.has_value())
    throw ConfigError("scheme requires an interaction block");
  if (in.interaction.has_value())
    in.interaction->validate(in.model.dim());

  const SlaterState init = solve_chf(in.model);

  // Quantal spread of <x^2> in the initial state: per-channel variance from
  // the projector, degeneracy channels independent, per-particle scaling.
  double sigma_mf = 0.0;
  {
    MatC x2 = MatC::Zero(in.model.dim(), in.model.dim());
    for (int i = 0; i < in.model.n_grid; ++i)
      x2(i, i) = in.model.x(i) * in.model.x(i);
    const double v1 = quantal_variance(init.density(), x2);
    const double a = in.model.total_particles();
    sigma_mf = std::sqrt(in.model.degeneracy * v1) / a;
  }

  const int n_traj = in.traj.n_traj;
  std::vector<TrajectoryRecord> records(n_traj);

  int workers = n_threads > 0
                    ? n_threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n_traj));

  std::atomic<int> next{0};
  auto work = [&]() {
    for (;;) {
      const int id = next.fetch_add(1);
      if (id >= n_traj) return;
      records[id] = run_trajectory(in, init, static_cast<std::uint64_t>(id));
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  EnsembleStats stats;
  stats.n_traj = n_traj;
  for (const auto& r : records)
    if (r.aborted) ++stats.n_aborted;
  if (stats.n_aborted * 10 > n_traj)
    throw ExcessiveAborts("aborted trajectories exceed 10%: " +
                              std::to_string(stats.n_aborted) + "/" +
                              std::to_string(n_traj),
                          stats.n_aborted, n_traj);

  const int n_out = in.traj.n_steps() / in.traj.stride + 1;
  stats.series.resize(n_out);
  stats.sigma_mf = sigma_mf;
  const int n_alive = n_traj - stats.n_aborted;

  for (int k = 0; k < n_out; ++k) {
    detail::Kahan s_msr, s_msr2, s_rms, s_ent;
    TimePoint& tp = stats.series[k];
    tp.t = k * in.traj.stride * in.traj.dt;
    tp.n_alive = n_alive;
    for (const auto& r : records) {
      if (r.aborted) continue;
      s_msr.add(r.msr[k]);
      s_msr2.add(r.msr[k] * r.msr[k]);
      s_rms.add(r.rms[k]);
      s_ent.add(r.entropy[k]);
      tp.max_trace_defect = std::max(tp.max_trace_defect, r.trace_defect[k]);
      tp.max_idem_defect = std::max(tp.max_idem_defect, r.idem_defect[k]);
      tp.max_overlap_defect =
          std::max(tp.max_overlap_defect, r.overlap_defect[k]);
    }
    const double inv = 1.0 / n_alive;
    tp.mean_msr = s_msr.value() * inv;
    tp.mean_rms = s_rms.value() * inv;
    tp.mean_entropy = s_ent.value() * inv;
    const double var = std::max(0.0, s_msr2.value() * inv -
                                         tp.mean_msr * tp.mean_msr);
    tp.delta_r = std::sqrt(var);
    tp.se_msr = n_alive > 1 ? std::sqrt(var / (n_alive - 1)) : 0.0;

    double var_rms = 0.0;
    if (n_alive > 1) {
      detail::Kahan s2;
      for (const auto& r : records) {
        if (r.aborted) continue;
        const double d = r.rms[k] - tp.mean_rms;
        s2.add(d * d);
      }
      var_rms = s2.value() / (n_alive - 1);
    }
    tp.se_rms = std::sqrt(var_rms / n_alive);
  }

  // Saturation fit of delta_r(t) when there is any spread to fit.
  std::vector<double> ts, dr;
  ts.reserve(n_out);
  dr.reserve(n_out);
  for (const auto& tp : stats.series) {
    ts.push_back(tp.t);
    dr.push_back(tp.delta_r);
  }
  if (static_cast<int>(ts.size()) >= 20) stats.fit = fit_saturation(ts, dr);
  return stats;
}

}  // namespace smf
