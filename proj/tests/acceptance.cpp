// Acceptance run: one [PASS]/[FAIL] line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "shadow/dynamics.hpp"
#include "shadow/integrators.hpp"
#include "shadow/linalg.hpp"
#include "shadow/pipeline.hpp"
#include "shadow/shadowing.hpp"
#include "shadow/verify.hpp"
#include "support.hpp"

using namespace shadow;
using namespace shadow::testing;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

MarchConfig lorenz_config(double T, std::size_t m = 1) {
  MarchConfig c;
  c.T = T;
  c.segment = 0.2;
  c.dt = 0.01;
  c.m = m;
  c.spinup_initial = 50;
  c.spinup_final = 20;
  return c;
}

MarchConfig ks_config(double T) {
  MarchConfig c;
  c.T = T;
  c.segment = 5;
  c.dt = 0.025;
  c.m = 20;
  c.spinup_initial = 1000;
  c.spinup_final = 50;
  c.tol_neutral = 0.005;
  return c;
}

EnsembleSpec ensemble(std::size_t members, std::uint64_t seed, AlgorithmChoice algorithm) {
  EnsembleSpec e;
  e.members = members;
  e.seed = seed;
  e.threads = 0;
  e.algorithm = algorithm;
  return e;
}

double max_relative_error(const MarchSolution& a, const MarchSolution& b) { return coefficient_error(a.a, b.a); }

std::string join(const std::vector<double>& xs, const char* pattern) {
  std::string s;
  for (double x : xs) s += (s.empty() ? "" : ", ") + fmt(pattern, x);
  return s;
}

Verdict lorenz_convergence() {
  Lorenz63 lz;
  const std::vector<double> horizons{20, 40, 80, 160, 320};
  const ConvergenceStudy study =
      sensitivity_error_study(ButcherTableau::classical_rk4(), lz, lorenz_objective(), lorenz_config(320), horizons,
                              1.0, ensemble(20, 2024, AlgorithmChoice::exact));
  const Estimate& last = study.sensitivities.back();
  const bool slope_ok = study.fit.slope >= -0.8 && study.fit.slope <= -0.25;
  const bool mean_ok = std::abs(last.mean - 1.0) <= 3.0 * last.std_error;
  return {slope_ok && mean_ok,
          fmt("error slope %.3f +- %.3f (band [-0.8, -0.25]) over errors [%s]; mean at T=320 %.5f +- %.5f", study.fit.slope,
              study.fit.half_width, join(study.ordinates, "%.3g").c_str(), last.mean, last.std_error)};
}

Verdict lorenz_unstable_dimension() {
  Lorenz63 lz;
  bool ok = true;
  std::string detail;
  for (double T : {100.0, 200.0}) {
    for (std::size_t k = 0; k < 3; ++k) {
      const MarchConfig c = member_march_config(lorenz_config(T, 3), 1, k);
      const LyapunovSpectrum s = run_spectrum(ButcherTableau::classical_rk4(), lz, lorenz_objective(),
                                              ensemble_initial_state(lz, 1, k), c);
      const std::size_t nu = classify_unstable(s, default_tol_neutral(s));
      ok = ok && nu == 1;
      detail += fmt("%sT=%g #%zu n_u=%zu (%.3f, %.4f, %.2f)", detail.empty() ? "" : "; ", T, k, nu, s.exponents[0],
                    s.exponents[1], s.exponents[2]);
    }
  }
  return {ok, detail};
}

Verdict defect_order(const DynamicalSystem& sys, const Objective& obj, const ButcherTableau& tab,
                     const MarchConfig& base, const std::vector<double>& steps, std::uint64_t seed, double target) {
  const ConvergenceStudy study =
      neutral_defect_study(tab, sys, obj, base, steps, ensemble(10, seed, AlgorithmChoice::automatic));
  return {std::abs(study.fit.slope - target) <= 0.5,
          fmt("slope %.3f +- %.3f (target %g +- 0.5) over defects [%s]", study.fit.slope, study.fit.half_width,
              target, join(study.ordinates, "%.3g").c_str())};
}

// One KS ensemble at T = 400 serves criteria 4 and 5.
std::vector<SensitivityReport> ks_ensemble() {
  KuramotoSivashinsky ks;
  return ensemble_runs(ButcherTableau::ralston_rk3(), ks, ks_objective(KSGrid{}), ks_config(400),
                       ensemble(10, 7, AlgorithmChoice::automatic));
}

Verdict ks_unstable_dimension(const std::vector<SensitivityReport>& runs) {
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& r : runs) {
    lo = std::min(lo, r.n_unstable);
    hi = std::max(hi, r.n_unstable);
  }
  return {lo >= 12 && hi <= 16,
          fmt("n_u in [%zu, %zu] over %zu trajectories at T=400; member 0 lambda_1 = %.4f", lo, hi, runs.size(),
              runs.front().spectrum.exponents.front())};
}

Verdict ks_sensitivity(const std::vector<SensitivityReport>& runs) {
  std::vector<double> s;
  for (const auto& r : runs) s.push_back(r.sensitivity);
  const Estimate e = summarize(s);
  return {std::abs(e.mean + 1.0) <= 3.0 * e.std_error,
          fmt("mean dJ/ds at T=400: %.4f +- %.4f (%zu trajectories)", e.mean, e.std_error, s.size())};
}

Verdict oracle_equivalence() {
  Lorenz63 lz;
  const Objective obj = lorenz_objective();
  const ButcherTableau tab = ButcherTableau::classical_rk4();
  const RunResult exact = run_march(tab, lz, obj, ensemble_initial_state(lz, 1, 0), lorenz_config(10, 1),
                                    AlgorithmChoice::exact);
  const double e_exact = max_relative_error(exact.solution, dense_march_oracle(exact.sweep, 1));
  const RunResult split = run_march(tab, lz, obj, ensemble_initial_state(lz, 1, 0), lorenz_config(10, 2),
                                    AlgorithmChoice::split);
  const double e_split =
      max_relative_error(split.solution, dense_march_oracle(split.sweep, split.solution.n_unstable));

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> kdist(1, 60), mdist(1, 6);
  double e_random = 0.0;
  const int fixtures = 200;
  for (int t = 0; t < fixtures; ++t) {
    const std::size_t m = mdist(rng), K = kdist(rng);
    const std::size_t nu = std::uniform_int_distribution<std::size_t>(0, m)(rng);
    const SweepResult all = dichotomy_sweep(rng, K, m, m);
    e_random = std::max(e_random, max_relative_error(march_exact(all), dense_march_oracle(all, m)));
    const SweepResult s = dichotomy_sweep(rng, K, m, nu);
    e_random = std::max(e_random, max_relative_error(march_split(s, nu), dense_march_oracle(s, nu)));
  }
  const bool ok = e_exact <= 1e-10 && e_split <= 1e-10 && e_random <= 1e-10;
  return {ok, fmt("Lorenz T=10 exact %.2e, split (n_u=%zu of m=2) %.2e; %d random fixtures %.2e", e_exact,
                  split.solution.n_unstable, e_split, fixtures, e_random)};
}

Verdict invariants() {
  std::vector<std::string> failed;
  std::mt19937_64 rng(99);

  double qr_worst = 0.0, bs_worst = 0.0;
  for (Eigen::Index n = 1; n <= 32; ++n) {
    for (Eigen::Index m = 1; m <= n; ++m) {
      const Matrix a = random_matrix(rng, n, m);
      const ThinQR qr = thin_qr(a);
      qr_worst = std::max(qr_worst, (qr.Q.transpose() * qr.Q - Matrix::Identity(m, m)).norm());
      qr_worst = std::max(qr_worst, (qr.Q * qr.R - a).norm() / a.norm());
      if ((qr.R.diagonal().array() < 0.0).any()) failed.emplace_back("QR sign");
    }
    const Matrix r = random_upper(rng, n);
    const Vector b = random_vector(rng, n);
    const Vector x = back_substitute(r, b);
    bs_worst = std::max(bs_worst, (r * x - b).norm() / (r.norm() * x.norm() + b.norm()));
  }
  if (qr_worst > 1e-12) failed.emplace_back("QR");
  if (bs_worst > 1e-12) failed.emplace_back("back substitution");

  double dual_worst = 0.0;
  Lorenz63 lz;
  KuramotoSivashinsky ks;
  for (const DynamicalSystem* sys : {static_cast<const DynamicalSystem*>(&lz), static_cast<const DynamicalSystem*>(&ks)}) {
    const auto n = static_cast<Eigen::Index>(sys->dimension());
    for (const ButcherTableau& tab : {ButcherTableau::classical_rk4(), ButcherTableau::ralston_rk3()}) {
      for (int trial = 0; trial < 20; ++trial) {
        const Vector u = random_vector(rng, n);
        const StepLinearization lin(tab, *sys, nullptr, u, 0.0, 0.01);
        Vector v = random_vector(rng, n);
        Vector w = random_vector(rng, n);
        Vector tv = v;
        lin.tangent(tv);
        const double lhs = w.dot(tv);
        lin.adjoint(w, false);
        const double back = w.dot(v);
        dual_worst = std::max(dual_worst, std::abs(lhs - back) / std::max(1.0, std::abs(lhs)));
      }
    }
  }
  if (dual_worst > 1e-12) failed.emplace_back("dual identity");

  // Segment continuity and gamma orthogonality on a Lorenz sweep with m = 2.
  const ButcherTableau rk4 = ButcherTableau::classical_rk4();
  const Objective obj = lorenz_objective();
  const MarchConfig c = lorenz_config(10, 2);
  const TrajectoryStore traj = prepare_trajectory(rk4, lz, ensemble_initial_state(lz, 5, 0), c);
  const SweepResult sweep = backward_sweep(rk4, lz, obj, traj, c);
  double cont_worst = 0.0, orth_worst = 0.0;
  const std::size_t S = c.steps_per_segment();
  for (std::size_t i = sweep.K(); i >= 1; --i) {
    const BundleResult bundle =
        integrate_adjoint_bundle(rk4, lz, obj, traj, 0.0, i * S, (i - 1) * S, sweep.Q(i), sweep.gamma(i));
    cont_worst = std::max(cont_worst, (sweep.Q(i - 1) * sweep.segments[i - 1].R - bundle.Y).norm() / bundle.Y.norm());
    orth_worst = std::max(orth_worst, (sweep.Q(i - 1).transpose() * sweep.gamma(i - 1)).norm() /
                                          std::max(1e-300, sweep.gamma(i - 1).norm()));
  }
  if (cont_worst > 1e-12) failed.emplace_back("segment continuity");
  if (orth_worst > 1e-12) failed.emplace_back("gamma orthogonality");

  // Seeded runs are bitwise reproducible, including across thread counts.
  EnsembleSpec one = ensemble(4, 31, AlgorithmChoice::automatic);
  one.threads = 1;
  EnsembleSpec many = one;
  many.threads = 4;
  const auto r1 = ensemble_runs(rk4, lz, obj, lorenz_config(20, 2), one);
  const auto r2 = ensemble_runs(rk4, lz, obj, lorenz_config(20, 2), many);
  bool same = r1.size() == r2.size();
  for (std::size_t k = 0; same && k < r1.size(); ++k) {
    same = r1[k].sensitivity == r2[k].sensitivity && r1[k].spectrum.exponents == r2[k].spectrum.exponents;
  }
  if (!same) failed.emplace_back("determinism");

  std::string list;
  for (const auto& f : failed) list += (list.empty() ? "" : ", ") + f;
  return {failed.empty(), fmt("QR %.1e, back-substitution %.1e, dual %.1e, continuity %.1e, orthogonality %.1e, "
                              "determinism %s%s%s",
                              qr_worst, bs_worst, dual_worst, cont_worst, orth_worst, same ? "ok" : "broken",
                              list.empty() ? "" : "; failed: ", list.c_str())};
}

Verdict boundedness_contrast() {
  Lorenz63 lz;
  const Objective obj = lorenz_objective();
  const ButcherTableau tab = ButcherTableau::classical_rk4();
  const MarchConfig c = lorenz_config(50);
  const RunResult run = run_march(tab, lz, obj, ensemble_initial_state(lz, 1, 0), c, AlgorithmChoice::exact);
  const double conventional = conventional_adjoint_norm(tab, lz, obj, run.trajectory, c.production_steps());
  const double ratio = conventional / run.solution.max_adjoint_norm;
  return {ratio >= 1e6, fmt("conventional |psi(0)| = %.3e, march max |psi| = %.3f, ratio %.2e", conventional,
                            run.solution.max_adjoint_norm, ratio)};
}

int failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!v.pass) ++failures;
  std::printf("[%s] %d %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), v.detail.c_str(), secs);
  std::fflush(stdout);
}

}  // namespace

int main() {
  Lorenz63 lz;
  KuramotoSivashinsky ks;
  report(1, "Lorenz sensitivity convergence", lorenz_convergence);
  report(2, "Lorenz unstable dimension", lorenz_unstable_dimension);
  report(3, "Lorenz neutral-defect order", [&] {
    return defect_order(lz, lorenz_objective(), ButcherTableau::classical_rk4(), lorenz_config(50),
                        {0.02, 0.01, 0.005, 0.0025}, 2024, 4.0);
  });
  // Computed on first use so its cost shows up under criterion 4.
  std::vector<SensitivityReport> ks_runs;
  std::string ks_error;
  bool ks_tried = false;
  const auto need_ks = [&](auto fn) {
    return [&, fn] {
      if (!ks_tried) {
        ks_tried = true;
        try {
          ks_runs = ks_ensemble();
        } catch (const std::exception& e) {
          ks_error = e.what();
        }
      }
      if (ks_runs.empty()) return Verdict{false, "KS ensemble failed: " + ks_error};
      return fn(ks_runs);
    };
  };
  report(4, "KS unstable dimension", need_ks(ks_unstable_dimension));
  report(5, "KS sensitivity", need_ks(ks_sensitivity));
  report(6, "KS neutral-defect order", [&] {
    return defect_order(ks, ks_objective(KSGrid{}), ButcherTableau::ralston_rk3(), ks_config(100), {0.05, 0.025, 0.0125},
                        2024, 3.0);
  });
  report(7, "oracle equivalence", oracle_equivalence);
  report(8, "desk-scale coverage", [] {
    return Verdict{true, "no criterion is excluded; Lorenz and KS cases above all run at desk scale"};
  });
  report(9, "invariant suites", invariants);
  report(10, "boundedness contrast", boundedness_contrast);
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
