#include "shadow/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "shadow/checkpoint.hpp"
#include "shadow/cli/output.hpp"
#include "shadow/verify.hpp"

#ifndef SHADOW_MARCH_VERSION
#define SHADOW_MARCH_VERSION "dev"
#endif

namespace shadow::cli {

using nlohmann::ordered_json;

namespace {

Provenance provenance_for(const RunConfig& config, const std::string& command) {
  return {config_hash(config), SHADOW_MARCH_VERSION, command};
}

std::filesystem::path prepare_output_dir(const RunConfig& config) {
  const auto dir = resolve_output_dir(config);
  std::filesystem::create_directories(dir);
  return dir;
}

EnsembleSpec ensemble_of(const RunConfig& config) {
  EnsembleSpec e;
  e.members = config.ensemble;
  e.seed = config.seed;
  e.threads = config.threads;
  e.algorithm = config.algorithm;
  return e;
}

void require_march_basis(const RunConfig& config, const DynamicalSystem& system) {
  try {
    config.march.validate(system.dimension());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("march: ") + e.what());
  }
}

ordered_json spectrum_json(const LyapunovSpectrum& spectrum) {
  ordered_json j;
  j["exponents"] = spectrum.exponents;
  j["K"] = spectrum.K;
  j["T"] = spectrum.T;
  j["order_violations"] = spectrum.order_violations;
  return j;
}

ordered_json report_json(const SensitivityReport& r) {
  ordered_json j;
  j["system"] = r.system;
  j["algorithm"] = r.algorithm;
  j["sensitivity"] = r.sensitivity;
  j["J_bar"] = r.J_bar;
  j["n_unstable"] = r.n_unstable;
  j["tol_neutral"] = r.tol_neutral;
  j["K"] = r.K;
  j["steps"] = r.steps;
  j["neutral_defect"] = r.neutral_defect;
  j["max_adjoint_norm"] = r.max_adjoint_norm;
  j["triangular_flops"] = r.triangular_flops;
  j["spectrum"] = spectrum_json(r.spectrum);
  return j;
}

ordered_json estimate_json(const Estimate& e) {
  ordered_json j;
  j["mean"] = e.mean;
  j["stderr"] = e.std_error;
  j["stddev"] = e.stddev;
  j["samples"] = e.values.size();
  return j;
}

std::vector<std::size_t> sample_steps(std::size_t N, std::size_t count) {
  std::vector<std::size_t> steps;
  if (count == 0) return steps;
  if (count == 1) return {0};
  for (std::size_t k = 0; k < count; ++k) {
    const auto step = static_cast<std::size_t>(
        std::llround(static_cast<double>(k) * static_cast<double>(N) / static_cast<double>(count - 1)));
    if (steps.empty() || steps.back() != step) steps.push_back(step);
  }
  return steps;
}

TrajectoryStore trajectory_for(const RunConfig& config, const ButcherTableau& tableau, const DynamicalSystem& system) {
  if (config.load_trajectory.empty()) {
    return prepare_trajectory(tableau, system, ensemble_initial_state(system, config.seed, 0), config.march);
  }
  TrajectoryStore t = read_checkpoint(config.load_trajectory);
  if (t.dimension() != system.dimension()) throw ConfigError("load_trajectory: state dimension does not match");
  if (std::abs(t.dt - config.march.dt) > 1e-12 * config.march.dt) {
    throw ConfigError("load_trajectory: stored dt does not match march.dt");
  }
  if (t.steps() < config.march.stored_steps()) throw ConfigError("load_trajectory: trajectory is too short");
  return t;
}

void write_segments(const std::filesystem::path& path, const Provenance& prov, const RunConfig& config,
                    const RunResult& run) {
  const std::size_t m = run.sweep.m;
  std::vector<std::string> header{"i", "t_start", "t_end", "a_norm", "b_norm", "gamma_norm", "h", "a_dot_d"};
  for (std::size_t j = 1; j <= m; ++j) header.push_back("log_r" + std::to_string(j));
  CsvWriter csv(path, prov, header);
  for (const auto& rec : run.sweep.segments) {
    const Vector& a = run.solution.a[rec.index];
    csv.cell(rec.index)
        .cell(static_cast<double>(rec.index - 1) * config.march.segment)
        .cell(static_cast<double>(rec.index) * config.march.segment)
        .cell(a.norm())
        .cell(rec.b.norm())
        .cell(rec.gamma.norm())
        .cell(rec.h)
        .cell(a.dot(rec.d));
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(m); ++j) csv.cell(std::log(std::abs(rec.R(j, j))));
    csv.end_row();
  }
}

void write_adjoint(const std::filesystem::path& path, const Provenance& prov, const DynamicalSystem& system,
                   const Objective& objective, const RunResult& run, const AdjointReconstruction& rec) {
  const std::size_t n = system.dimension();
  std::vector<std::string> header{"step", "t", "psi_norm", "psi_dot_f", "flow_residual"};
  for (std::size_t j = 1; j <= n; ++j) header.push_back("psi" + std::to_string(j));
  CsvWriter csv(path, prov, header);
  const double s = system.parameter();
  for (std::size_t k = 0; k < rec.sample_steps.size(); ++k) {
    const std::size_t step = rec.sample_steps[k];
    const Vector u = run.trajectory.state(step);
    const Vector psi = rec.samples.col(static_cast<Eigen::Index>(k));
    const double pf = psi.dot(rhs(system, u, s));
    csv.cell(step).cell(run.trajectory.time(step)).cell(psi.norm()).cell(pf);
    csv.cell(pf + objective.value(u, s) - run.sweep.J_bar);
    for (Eigen::Index j = 0; j < psi.size(); ++j) csv.cell(psi[j]);
    csv.end_row();
  }
}

}  // namespace

ordered_json numerical_diagnostic(const NumericalError& error) {
  ordered_json j;
  j["status"] = "numerical_failure";
  std::string kind = "NumericalError";
  if (const auto* e = dynamic_cast<const IntegrationDiverged*>(&error)) {
    kind = "IntegrationDiverged";
    j["step"] = e->step();
  } else if (const auto* e = dynamic_cast<const RankDeficient*>(&error)) {
    kind = "RankDeficient";
    j["column"] = e->column();
  } else if (const auto* e = dynamic_cast<const SingularSystem*>(&error)) {
    kind = "SingularSystem";
    j["index"] = e->index();
  } else if (dynamic_cast<const NearEquilibrium*>(&error) != nullptr) {
    kind = "NearEquilibrium";
  } else if (dynamic_cast<const SubspaceOverflow*>(&error) != nullptr) {
    kind = "SubspaceOverflow";
  }
  j["error"] = kind;
  j["message"] = error.what();
  return j;
}

ordered_json describe(const RunConfig& config) {
  const auto system = make_system(config);
  const MarchConfig& m = config.march;
  ordered_json j;
  j["system"] = system->info().name;
  j["dimension"] = system->dimension();
  j["integrator"] = config.integrator;
  j["algorithm"] = to_string(config.algorithm);
  j["m"] = m.m;
  j["K"] = m.segments();
  j["steps_per_segment"] = m.steps_per_segment();
  j["N"] = m.production_steps();
  j["spinup_initial_steps"] = m.spinup_initial_steps();
  j["spinup_final_steps"] = m.spinup_final_steps();
  j["stored_steps"] = m.stored_steps();
  j["ensemble"] = config.ensemble;
  j["config_hash"] = provenance_for(config, "").hash_hex();
  return j;
}

void cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto system = make_system(config);
  const Objective objective = make_objective(config);
  const ButcherTableau tableau = make_tableau(config);
  require_march_basis(config, *system);
  const auto dir = prepare_output_dir(config);
  const Provenance prov = provenance_for(config, "run");

  const MarchConfig first = member_march_config(config.march, config.seed, 0);
  const RunResult run =
      run_march_on(tableau, *system, objective, trajectory_for(config, tableau, *system), first, config.algorithm);
  const auto rec = reconstruct_adjoint(tableau, *system, objective, run.trajectory, first, run.sweep, run.solution,
                                       sample_steps(config.march.production_steps(), config.adjoint_samples));

  std::vector<SensitivityReport> members(config.ensemble);
  members[0] = run.report;
  parallel_for(config.ensemble - 1, config.threads, [&](std::size_t k) {
    const MarchConfig c = member_march_config(config.march, config.seed, k + 1);
    members[k + 1] =
        run_march(tableau, *system, objective, ensemble_initial_state(*system, config.seed, k + 1), c, config.algorithm)
            .report;
  });

  if (config.save_trajectory) write_checkpoint(dir / "trajectory.shmt", run.trajectory);
  write_segments(dir / "segments.csv", prov, config, run);
  write_adjoint(dir / "adjoint.csv", prov, *system, objective, run, rec);
  {
    CsvWriter csv(dir / "members.csv", prov,
                  {"member", "sensitivity", "J_bar", "n_unstable", "algorithm", "neutral_defect", "max_adjoint_norm"});
    for (std::size_t k = 0; k < members.size(); ++k) {
      const auto& r = members[k];
      csv.cell(k).cell(r.sensitivity).cell(r.J_bar).cell(r.n_unstable).cell(r.algorithm).cell(r.neutral_defect);
      csv.cell(r.max_adjoint_norm).end_row();
    }
  }

  std::vector<double> sens;
  for (const auto& r : members) sens.push_back(r.sensitivity);
  const Estimate ensemble = summarize(sens);

  ordered_json summary;
  summary["provenance"] = prov.to_json();
  summary["config"] = config.canonical;
  summary["derived"] = describe(config);
  summary["run"] = report_json(run.report);
  ordered_json a_norms = ordered_json::array();
  for (const auto& a : run.solution.a) a_norms.push_back(a.norm());
  summary["run"]["a_norms"] = a_norms;
  ordered_json recon;
  recon["neutral_defect"] = rec.neutral_defect;
  recon["max_norm"] = rec.max_norm;
  recon["max_flow_residual"] = rec.max_flow_residual;
  recon["terminal_flow_residual"] = rec.terminal_flow_residual;
  recon["max_continuity_mismatch"] = rec.max_continuity_mismatch;
  summary["reconstruction"] = recon;
  summary["ensemble"] = estimate_json(ensemble);
  write_json(dir / "summary.json", summary);

  if (!run.report.spectrum.order_violations.empty()) {
    err << "warning: Lyapunov exponents out of order at " << run.report.spectrum.order_violations.size()
        << " position(s)\n";
  }
  out << "sensitivity " << format_double(run.report.sensitivity) << " (" << run.report.algorithm
      << ", n_u=" << run.report.n_unstable << ", K=" << run.report.K << ")";
  if (config.ensemble > 1) {
    out << "; ensemble mean " << format_double(ensemble.mean) << " +- " << format_double(ensemble.std_error);
  }
  out << "\nwrote " << dir.string() << "\n";
}

void cmd_lyapunov(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto system = make_system(config);
  const Objective objective = make_objective(config);
  const ButcherTableau tableau = make_tableau(config);
  const auto dir = prepare_output_dir(config);
  const Provenance prov = provenance_for(config, "lyapunov");

  std::vector<LyapunovSpectrum> spectra(config.ensemble);
  parallel_for(config.ensemble, config.threads, [&](std::size_t k) {
    const MarchConfig c = member_march_config(config.march, config.seed, k);
    spectra[k] = run_spectrum(tableau, *system, objective, ensemble_initial_state(*system, config.seed, k), c);
  });

  ordered_json members = ordered_json::array();
  {
    CsvWriter csv(dir / "spectrum.csv", prov, {"member", "j", "exponent", "unstable"});
    for (std::size_t k = 0; k < spectra.size(); ++k) {
      const double tol = config.march.tol_neutral.value_or(default_tol_neutral(spectra[k]));
      const std::size_t nu = count_unstable(spectra[k], tol);
      for (std::size_t j = 0; j < spectra[k].exponents.size(); ++j) {
        csv.cell(k).cell(j + 1).cell(spectra[k].exponents[j]).cell(std::size_t{j < nu ? 1u : 0u}).end_row();
      }
      ordered_json mj = spectrum_json(spectra[k]);
      mj["tol_neutral"] = tol;
      mj["n_unstable"] = nu;
      members.push_back(mj);
      if (!spectra[k].order_violations.empty()) {
        err << "warning: member " << k << " exponents out of order at " << spectra[k].order_violations.size()
            << " position(s)\n";
      }
    }
  }
  ordered_json summary;
  summary["provenance"] = prov.to_json();
  summary["config"] = config.canonical;
  summary["derived"] = describe(config);
  summary["members"] = members;
  write_json(dir / "summary.json", summary);

  out << "lambda:";
  for (double l : spectra[0].exponents) out << ' ' << format_double(l);
  out << "\nn_u " << members[0]["n_unstable"].get<std::size_t>() << "\nwrote " << dir.string() << "\n";
}

void cmd_converge(const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (!config.study) throw ConfigError("study: required for the converge command");
  const auto system = make_system(config);
  const Objective objective = make_objective(config);
  const ButcherTableau tableau = make_tableau(config);
  require_march_basis(config, *system);
  const StudyConfig& st = *config.study;
  ConvergenceStudy study;
  try {
    study.abscissae = st.values;
    study.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("study.values: ") + e.what());
  }
  const auto dir = prepare_output_dir(config);
  const Provenance prov = provenance_for(config, "converge");

  if (st.mode == "T") {
    study = sensitivity_error_study(tableau, *system, objective, config.march, st.values, *st.reference,
                                    ensemble_of(config));
  } else {
    study = neutral_defect_study(tableau, *system, objective, config.march, st.values, ensemble_of(config));
  }

  {
    CsvWriter csv(dir / "study.csv", prov,
                  {study.abscissa, study.ordinate, "stderr", "sensitivity_mean", "sensitivity_stderr"});
    for (std::size_t i = 0; i < study.abscissae.size(); ++i) {
      csv.cell(study.abscissae[i]).cell(study.ordinates[i]).cell(study.stderrs[i]);
      csv.cell(study.sensitivities[i].mean).cell(study.sensitivities[i].std_error).end_row();
    }
  }
  ordered_json summary;
  summary["provenance"] = prov.to_json();
  summary["config"] = config.canonical;
  ordered_json fit;
  fit["slope"] = study.fit.slope;
  fit["intercept"] = study.fit.intercept;
  fit["half_width"] = study.fit.half_width;
  fit["clamped"] = study.fit.clamped;
  summary["fit"] = fit;
  write_json(dir / "summary.json", summary);

  if (study.fit.clamped > 0) {
    err << "warning: " << study.fit.clamped << " non-positive ordinate(s) clamped to 1e-16 before the fit\n";
  }
  out << "slope " << format_double(study.fit.slope) << " +- " << format_double(study.fit.half_width) << " ("
      << study.ordinate << " vs " << study.abscissa << ")\nwrote " << dir.string() << "\n";
}

void cmd_oracle(const RunConfig& config, std::ostream& out, std::ostream& /*err*/) {
  const auto system = make_system(config);
  const Objective objective = make_objective(config);
  const ButcherTableau tableau = make_tableau(config);
  require_march_basis(config, *system);
  const auto dir = prepare_output_dir(config);
  const Provenance prov = provenance_for(config, "oracle");

  const MarchConfig first = member_march_config(config.march, config.seed, 0);
  const RunResult run =
      run_march_on(tableau, *system, objective, trajectory_for(config, tableau, *system), first, config.algorithm);

  ordered_json summary;
  summary["provenance"] = prov.to_json();
  summary["config"] = config.canonical;
  summary["march"] = report_json(run.report);

  CsvWriter csv(dir / "oracle.csv", prov, {"check", "march", "oracle", "delta", "oracle_stderr"});
  const std::size_t Km = run.sweep.K() * run.sweep.m;
  ordered_json dense;
  if (Km > kDenseOracleLimit) {
    dense["status"] = "skipped";
    dense["reason"] = "K*m = " + std::to_string(Km) + " exceeds the dense bound " + std::to_string(kDenseOracleLimit);
    out << "dense oracle skipped: " << dense["reason"].get<std::string>() << "\n";
  } else {
    const std::size_t nu =
        run.solution.algorithm == MarchAlgorithm::exact ? run.sweep.m : run.solution.n_unstable;
    const MarchSolution oracle = dense_march_oracle(run.sweep, nu);
    // Relative to the largest coefficient: a_K^s is exactly zero in the split march.
    double worst = 0.0, scale = 1e-300;
    for (std::size_t i = 0; i < oracle.a.size(); ++i) {
      scale = std::max({scale, oracle.a[i].norm(), run.solution.a[i].norm()});
      worst = std::max(worst, (run.solution.a[i] - oracle.a[i]).norm());
    }
    worst /= scale;
    dense["status"] = "ok";
    dense["n_unstable"] = nu;
    dense["sensitivity"] = oracle.sensitivity;
    dense["max_relative_coefficient_delta"] = worst;
    csv.cell(std::string("dense_sensitivity")).cell(run.solution.sensitivity).cell(oracle.sensitivity);
    csv.cell(run.solution.sensitivity - oracle.sensitivity).cell(0.0).end_row();
    out << "dense oracle: max relative coefficient delta " << format_double(worst) << "\n";
  }
  summary["dense"] = dense;

  FdOracleConfig fd;
  fd.delta_s = config.oracle.delta_s;
  fd.window = config.oracle.window;
  fd.spinup = config.oracle.spinup;
  fd.dt = config.march.dt;
  fd.ensemble = config.oracle.ensemble;
  fd.seed = config.seed;
  fd.threads = config.threads;
  const Estimate est = fd_sensitivity_oracle(tableau, *system, objective, fd);
  ordered_json fdj = estimate_json(est);
  fdj["delta_s"] = fd.delta_s;
  fdj["window"] = fd.window;
  fdj["delta"] = run.solution.sensitivity - est.mean;
  summary["finite_difference"] = fdj;
  csv.cell(std::string("fd_sensitivity")).cell(run.solution.sensitivity).cell(est.mean);
  csv.cell(run.solution.sensitivity - est.mean).cell(est.std_error).end_row();
  write_json(dir / "summary.json", summary);

  out << "march " << format_double(run.solution.sensitivity) << ", finite difference " << format_double(est.mean)
      << " +- " << format_double(est.std_error) << "\nwrote " << dir.string() << "\n";
}

bool converge_self_test(std::ostream& out) {
  const std::vector<double> T{20, 40, 80, 160, 320};
  const std::vector<double> dt{0.02, 0.01, 0.005, 0.0025};
  std::vector<double> e1, e2;
  for (double t : T) e1.push_back(3.0 / std::sqrt(t));
  for (double h : dt) e2.push_back(7.0 * std::pow(h, 4));
  const SlopeFit f1 = slope_fit(T, e1);
  const SlopeFit f2 = slope_fit(dt, e2);
  const bool ok1 = std::abs(f1.slope + 0.5) <= 1e-12;
  const bool ok2 = std::abs(f2.slope - 4.0) <= 1e-12;
  out << (ok1 ? "PASS" : "FAIL") << " C*T^-1/2 slope " << format_double(f1.slope) << "\n";
  out << (ok2 ? "PASS" : "FAIL") << " C*dt^4 slope " << format_double(f2.slope) << "\n";
  return ok1 && ok2;
}

int run_command(const std::string& command, const std::filesystem::path& config_path, const CommandOptions& options,
                std::ostream& out, std::ostream& err) {
  try {
    if (command == "converge" && options.self_test) return converge_self_test(out) ? kExitOk : kExitFailure;
    if (command != "run" && command != "lyapunov" && command != "converge" && command != "oracle") {
      err << "error: unknown command '" << command << "'\n";
      return kExitInvalidConfig;
    }
    const RunConfig config = load_config(config_path);
    if (options.dry_run) {
      if (command != "lyapunov") require_march_basis(config, *make_system(config));
      ordered_json d = describe(config);
      d["output_dir"] = resolve_output_dir(config).string();
      out << d.dump(2) << "\n";
      return kExitOk;
    }
    if (command == "run") cmd_run(config, out, err);
    if (command == "lyapunov") cmd_lyapunov(config, out, err);
    if (command == "converge") cmd_converge(config, out, err);
    if (command == "oracle") cmd_oracle(config, out, err);
    return kExitOk;
  } catch (const NumericalError& e) {
    err << numerical_diagnostic(e).dump() << "\n";
    return kExitNumerical;
  } catch (const ContractViolation& e) {
    err << "error: invalid configuration: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace shadow::cli
