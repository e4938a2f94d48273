#include "shadow/pipeline.hpp"

#include "shadow/errors.hpp"

namespace shadow {

AlgorithmChoice parse_algorithm(const std::string& name) {
  if (name == "exact") return AlgorithmChoice::exact;
  if (name == "split") return AlgorithmChoice::split;
  if (name == "auto") return AlgorithmChoice::automatic;
  throw ContractViolation("unknown algorithm '" + name + "' (expected exact, split or auto)");
}

std::string to_string(AlgorithmChoice choice) {
  switch (choice) {
    case AlgorithmChoice::exact:
      return "exact";
    case AlgorithmChoice::split:
      return "split";
    case AlgorithmChoice::automatic:
      return "auto";
  }
  return "?";
}

std::string to_string(MarchAlgorithm algorithm) { return algorithm == MarchAlgorithm::exact ? "exact" : "split"; }

TrajectoryStore prepare_trajectory(const ButcherTableau& tableau, const DynamicalSystem& system,
                                   const Vector& u_init, const MarchConfig& config) {
  const double s = system.parameter();
  const Vector u0 = advance(tableau, system, u_init, s, config.dt, config.spinup_initial_steps());
  return integrate_primal(tableau, system, u0, s, config.dt, config.stored_steps(), 0.0);
}

RunResult run_march_on(const ButcherTableau& tableau, const DynamicalSystem& system, const Objective& objective,
                       TrajectoryStore trajectory, const MarchConfig& config, AlgorithmChoice choice) {
  RunResult out;
  out.trajectory = std::move(trajectory);
  out.sweep = backward_sweep(tableau, system, objective, out.trajectory, config, SweepMode::march);
  const LyapunovSpectrum spectrum = lyapunov_exponents(out.sweep.segments, config.T);
  const double tol = config.tol_neutral.value_or(default_tol_neutral(spectrum));
  const std::size_t counted = count_unstable(spectrum, tol);

  switch (choice) {
    case AlgorithmChoice::exact:
      out.solution = march_exact(out.sweep);
      break;
    case AlgorithmChoice::split:
      out.solution = march_split(out.sweep, classify_unstable(spectrum, tol));
      break;
    case AlgorithmChoice::automatic:
      out.solution = counted < config.m ? march_split(out.sweep, counted) : march_exact(out.sweep);
      break;
  }

  auto& r = out.report;
  r.system = system.info().name;
  r.algorithm = to_string(out.solution.algorithm);
  r.sensitivity = out.solution.sensitivity;
  r.J_bar = out.solution.J_bar;
  r.spectrum = spectrum;
  r.tol_neutral = tol;
  r.n_unstable = counted;
  r.K = out.sweep.K();
  r.steps = config.production_steps();
  r.neutral_defect = out.solution.neutral_defect;
  r.max_adjoint_norm = out.solution.max_adjoint_norm;
  r.triangular_flops = out.solution.triangular_flops;
  return out;
}

RunResult run_march(const ButcherTableau& tableau, const DynamicalSystem& system, const Objective& objective,
                    const Vector& u_init, const MarchConfig& config, AlgorithmChoice choice) {
  config.validate(system.dimension());
  return run_march_on(tableau, system, objective, prepare_trajectory(tableau, system, u_init, config), config,
                      choice);
}

LyapunovSpectrum run_spectrum(const ButcherTableau& tableau, const DynamicalSystem& system,
                              const Objective& objective, const Vector& u_init, const MarchConfig& config) {
  config.validate(system.dimension(), true);
  const TrajectoryStore trajectory = prepare_trajectory(tableau, system, u_init, config);
  const SweepResult sweep = backward_sweep(tableau, system, objective, trajectory, config, SweepMode::spectrum);
  return lyapunov_exponents(sweep.segments, config.T);
}

std::uint64_t member_seed(std::uint64_t seed, std::size_t member) {
  // splitmix64 of (seed, member)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(member) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

MarchConfig member_march_config(const MarchConfig& base, std::uint64_t seed, std::size_t member) {
  MarchConfig c = base;
  c.seed = member_seed(seed ^ 0x5bd1e995ULL, member);
  return c;
}

Vector ensemble_initial_state(const DynamicalSystem& system, std::uint64_t seed, std::size_t member) {
  std::mt19937_64 rng(member_seed(seed, member));
  return system.sample_initial_state(rng);
}

}  // namespace shadow
