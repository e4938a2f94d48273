#include "shadow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "shadow/errors.hpp"

namespace shadow {

MarchSolution dense_march_oracle(const SweepResult& sweep, std::size_t n_unstable) {
  if (!sweep.has_particular) throw ContractViolation("dense_march_oracle: sweep has no particular solution");
  const std::size_t K = sweep.K();
  const std::size_t m = sweep.m;
  if (n_unstable > m) throw ContractViolation("dense_march_oracle: n_u exceeds m");
  if (K * m > kDenseOracleLimit) {
    throw ContractViolation("dense_march_oracle: K*m = " + std::to_string(K * m) + " exceeds the dense bound");
  }
  const auto M = static_cast<Eigen::Index>(m);
  const auto nu = static_cast<Eigen::Index>(n_unstable);
  const Eigen::Index ns = M - nu;
  const Eigen::Index size = static_cast<Eigen::Index>(K) * M + ns;
  const Eigen::Index a0s = static_cast<Eigen::Index>(K) * M;  // offset of the a_0^s unknowns

  Matrix A = Matrix::Zero(size, size);
  Vector rhs = Vector::Zero(size);
  for (std::size_t i = 1; i <= K; ++i) {
    const auto& rec = sweep.segments[i - 1];
    const Eigen::Index row = static_cast<Eigen::Index>(i - 1) * M;
    A.block(row, row, M, M) = rec.R;
    if (i >= 2) {
      A.block(row, row - M, M, M) -= Matrix::Identity(M, M);
    } else if (ns > 0) {
      A.block(row + nu, a0s, ns, ns) -= Matrix::Identity(ns, ns);
    }
    rhs.segment(row, M) = rec.b;
  }
  if (ns > 0) A.block(a0s, a0s - ns, ns, ns) = Matrix::Identity(ns, ns);

  Eigen::PartialPivLU<Matrix> lu(A);
  if (!(lu.rcond() > 1e-15)) throw SingularSystem(0);
  const Vector x = lu.solve(rhs);

  MarchSolution sol;
  sol.algorithm = n_unstable == m ? MarchAlgorithm::exact : MarchAlgorithm::split;
  sol.n_unstable = n_unstable;
  sol.a.resize(K + 1);
  sol.a[0] = Vector::Zero(M);
  if (ns > 0) sol.a[0].tail(ns) = x.segment(a0s, ns);
  for (std::size_t i = 1; i <= K; ++i) sol.a[i] = x.segment(static_cast<Eigen::Index>(i - 1) * M, M);
  assemble_solution(sweep, sol);
  return sol;
}

Estimate summarize(std::vector<double> values) {
  Estimate e;
  const auto n = static_cast<double>(values.size());
  if (values.empty()) return e;
  e.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    e.stddev = std::sqrt(ss / (n - 1.0));
    e.std_error = e.stddev / std::sqrt(n);
  }
  e.values = std::move(values);
  return e;
}

Estimate fd_sensitivity_oracle(const ButcherTableau& tableau, const DynamicalSystem& system,
                               const Objective& objective, const FdOracleConfig& config) {
  if (!(config.delta_s > 0.0)) throw ContractViolation("fd_sensitivity_oracle: delta_s must be positive");
  if (config.ensemble == 0) throw ContractViolation("fd_sensitivity_oracle: empty ensemble");
  MarchConfig grid;
  grid.dt = config.dt;
  grid.segment = 2.0 * config.dt;
  grid.T = config.window;
  grid.spinup_initial = config.spinup;
  const std::size_t window_steps = grid.production_steps();
  const std::size_t spinup_steps = grid.spinup_initial_steps();

  const double s = system.parameter();
  const auto plus = system.with_parameter(s + config.delta_s);
  const auto minus = system.with_parameter(s - config.delta_s);
  std::vector<double> values(config.ensemble);
  parallel_for(config.ensemble, config.threads, [&](std::size_t k) {
    const Vector u_init = ensemble_initial_state(system, config.seed, k);
    auto average = [&](const DynamicalSystem& sys) {
      const double sp = sys.parameter();
      const Vector u0 = advance(tableau, sys, u_init, sp, config.dt, spinup_steps);
      const TrajectoryStore traj = integrate_primal(tableau, sys, u0, sp, config.dt, window_steps);
      return output_averages(sys, objective, traj, window_steps).J_bar;
    };
    values[k] = (average(*plus) - average(*minus)) / (2.0 * config.delta_s);
  });
  return summarize(std::move(values));
}

SlopeFit slope_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractViolation("slope_fit: need at least two (x, y) pairs");
  SlopeFit fit;
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0)) throw ContractViolation("slope_fit: abscissae must be positive");
    double yi = y[i];
    if (!(yi > 0.0)) {
      yi = 1e-16;
      ++fit.clamped;
    }
    lx[i] = std::log(x[i]);
    ly[i] = std::log(yi);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw ContractViolation("slope_fit: abscissae must not all coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
      ssr += r * r;
    }
    const double dof = static_cast<double>(n - 2);
    const double se = std::sqrt(ssr / dof / sxx);
    const boost::math::students_t dist(dof);
    fit.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * se;
  } else {
    fit.half_width = std::numeric_limits<double>::infinity();
  }
  return fit;
}

void ConvergenceStudy::validate() const {
  if (abscissae.size() < kMinStudyPoints) {
    throw ContractViolation("convergence study needs at least " + std::to_string(kMinStudyPoints) + " points, got " +
                            std::to_string(abscissae.size()));
  }
  const bool up = abscissae[1] > abscissae[0];
  for (std::size_t i = 1; i < abscissae.size(); ++i) {
    if (up ? !(abscissae[i] > abscissae[i - 1]) : !(abscissae[i] < abscissae[i - 1])) {
      throw ContractViolation("convergence study abscissae must be strictly monotone");
    }
  }
}

std::vector<SensitivityReport> ensemble_runs(const ButcherTableau& tableau, const DynamicalSystem& system,
                                             const Objective& objective, const MarchConfig& config,
                                             const EnsembleSpec& ensemble) {
  config.validate(system.dimension());
  std::vector<SensitivityReport> reports(ensemble.members);
  parallel_for(ensemble.members, ensemble.threads, [&](std::size_t k) {
    const MarchConfig c = member_march_config(config, ensemble.seed, k);
    const Vector u_init = ensemble_initial_state(system, ensemble.seed, k);
    reports[k] = run_march(tableau, system, objective, u_init, c, ensemble.algorithm).report;
  });
  return reports;
}

ConvergenceStudy sensitivity_error_study(const ButcherTableau& tableau, const DynamicalSystem& system,
                                         const Objective& objective, const MarchConfig& base,
                                         const std::vector<double>& horizons, double reference,
                                         const EnsembleSpec& ensemble) {
  ConvergenceStudy study;
  study.abscissa = "T";
  study.ordinate = "mean_abs_sensitivity_error";
  study.abscissae = horizons;
  study.validate();
  std::vector<MarchConfig> configs;
  for (double T : horizons) {
    MarchConfig c = base;
    c.T = T;
    c.validate(system.dimension());
    configs.push_back(c);
  }
  const auto longest = std::max_element(horizons.begin(), horizons.end()) - horizons.begin();

  const std::size_t P = horizons.size(), M = ensemble.members;
  std::vector<double> sens(P * M);
  parallel_for(M, ensemble.threads, [&](std::size_t k) {
    const Vector u_init = ensemble_initial_state(system, ensemble.seed, k);
    const TrajectoryStore trajectory = prepare_trajectory(tableau, system, u_init, configs[longest]);
    for (std::size_t p = 0; p < P; ++p) {
      const MarchConfig c = member_march_config(configs[p], ensemble.seed, k);
      sens[p * M + k] = run_march_on(tableau, system, objective, trajectory, c, ensemble.algorithm).report.sensitivity;
    }
  });

  for (std::size_t p = 0; p < P; ++p) {
    std::vector<double> values(sens.begin() + static_cast<long>(p * M), sens.begin() + static_cast<long>((p + 1) * M));
    std::vector<double> errors(M);
    for (std::size_t k = 0; k < M; ++k) errors[k] = std::abs(values[k] - reference);
    const Estimate e = summarize(errors);
    study.ordinates.push_back(e.mean);
    study.stderrs.push_back(e.std_error);
    study.sensitivities.push_back(summarize(std::move(values)));
  }
  study.fit = slope_fit(study.abscissae, study.ordinates);
  return study;
}

ConvergenceStudy neutral_defect_study(const ButcherTableau& tableau, const DynamicalSystem& system,
                                      const Objective& objective, const MarchConfig& base,
                                      const std::vector<double>& steps, const EnsembleSpec& ensemble) {
  ConvergenceStudy study;
  study.abscissa = "dt";
  study.ordinate = "mean_neutral_defect";
  study.abscissae = steps;
  study.validate();
  std::vector<MarchConfig> configs;
  for (double dt : steps) {
    MarchConfig c = base;
    c.dt = dt;
    c.validate(system.dimension());
    configs.push_back(c);
  }
  const std::size_t P = steps.size(), M = ensemble.members;
  std::vector<double> defect(P * M), sens(P * M);
  parallel_for(P * M, ensemble.threads, [&](std::size_t job) {
    const std::size_t p = job / M, k = job % M;
    const MarchConfig c = member_march_config(configs[p], ensemble.seed, k);
    const Vector u_init = ensemble_initial_state(system, ensemble.seed, k);
    const auto report = run_march(tableau, system, objective, u_init, c, ensemble.algorithm).report;
    defect[job] = report.neutral_defect;
    sens[job] = report.sensitivity;
  });
  for (std::size_t p = 0; p < P; ++p) {
    const Estimate e = summarize({defect.begin() + static_cast<long>(p * M), defect.begin() + static_cast<long>((p + 1) * M)});
    study.ordinates.push_back(e.mean);
    study.stderrs.push_back(e.std_error);
    study.sensitivities.push_back(
        summarize({sens.begin() + static_cast<long>(p * M), sens.begin() + static_cast<long>((p + 1) * M)}));
  }
  study.fit = slope_fit(study.abscissae, study.ordinates);
  return study;
}

}  // namespace shadow
