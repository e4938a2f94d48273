#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "shadow/dynamics.hpp"
#include "shadow/integrators.hpp"
#include "shadow/shadowing.hpp"

namespace shadow {

enum class AlgorithmChoice { exact, split, automatic };

[[nodiscard]] AlgorithmChoice parse_algorithm(const std::string& name);
[[nodiscard]] std::string to_string(AlgorithmChoice choice);
[[nodiscard]] std::string to_string(MarchAlgorithm algorithm);

/// Everything a single stabilized-march run produces.
struct SensitivityReport {
  std::string system;
  std::string algorithm;
  double sensitivity = 0.0;
  double J_bar = 0.0;
  LyapunovSpectrum spectrum;
  double tol_neutral = 0.0;
  std::size_t n_unstable = 0;
  std::size_t K = 0;
  std::size_t steps = 0;
  double neutral_defect = 0.0;
  double max_adjoint_norm = 0.0;
  std::size_t triangular_flops = 0;
};

struct RunResult {
  TrajectoryStore trajectory;
  SweepResult sweep;
  MarchSolution solution;
  SensitivityReport report;
};

/// Spins u_init up for spinup_initial, then stores [0, T + spinup_final].
[[nodiscard]] TrajectoryStore prepare_trajectory(const ButcherTableau& tableau, const DynamicalSystem& system,
                                                 const Vector& u_init, const MarchConfig& config);

/// Runs the march on an existing trajectory (covering [0, T + spinup_final]).
[[nodiscard]] RunResult run_march_on(const ButcherTableau& tableau, const DynamicalSystem& system,
                                     const Objective& objective, TrajectoryStore trajectory,
                                     const MarchConfig& config, AlgorithmChoice choice);

/// Primal solve, backward sweep, march and diagnostics.
[[nodiscard]] RunResult run_march(const ButcherTableau& tableau, const DynamicalSystem& system,
                                  const Objective& objective, const Vector& u_init, const MarchConfig& config,
                                  AlgorithmChoice choice);

/// Homogeneous sweep only; m may equal n.
[[nodiscard]] LyapunovSpectrum run_spectrum(const ButcherTableau& tableau, const DynamicalSystem& system,
                                            const Objective& objective, const Vector& u_init,
                                            const MarchConfig& config);

/// Deterministic per-member seed stream.
[[nodiscard]] std::uint64_t member_seed(std::uint64_t seed, std::size_t member);

/// Config of ensemble member `member`: same as `base` with its own basis seed.
[[nodiscard]] MarchConfig member_march_config(const MarchConfig& base, std::uint64_t seed, std::size_t member);

/// Initial condition of ensemble member `member` drawn from the system's box.
[[nodiscard]] Vector ensemble_initial_state(const DynamicalSystem& system, std::uint64_t seed, std::size_t member);

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0 = hardware concurrency).
/// Exceptions from workers are rethrown on the caller, lowest index first.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(threads, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace shadow
