#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shadow/dynamics.hpp"
#include "shadow/integrators.hpp"
#include "shadow/pipeline.hpp"
#include "shadow/shadowing.hpp"

namespace shadow {

/// Largest K*m the dense oracle will assemble.
inline constexpr std::size_t kDenseOracleLimit = 2000;

/**
 * Brute-force reference for the coefficient recursion.
 *
 * Stacks R_{i-1} a_i - a_{i-1} = b_{i-1} for i = 1..K with a_0^u = 0 and, when
 * n_unstable < m, the closure a_K^s = 0 (a_0^s becomes an unknown), and solves the
 * whole block-bidiagonal system with a dense LU. n_unstable == m reproduces the
 * exact march, anything smaller the split march.
 */
[[nodiscard]] MarchSolution dense_march_oracle(const SweepResult& sweep, std::size_t n_unstable);

/// Sample mean with its standard error.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  double stddev = 0.0;
  std::vector<double> values;
};
[[nodiscard]] Estimate summarize(std::vector<double> values);

struct FdOracleConfig {
  double delta_s = 0.5;
  double window = 500.0;
  double spinup = 50.0;
  double dt = 0.01;
  std::size_t ensemble = 20;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

/// Central difference (J_bar(s + ds) - J_bar(s - ds)) / 2ds per ensemble member; both
/// sides start from the same random initial state and share the spin-up length.
[[nodiscard]] Estimate fd_sensitivity_oracle(const ButcherTableau& tableau, const DynamicalSystem& system,
                                             const Objective& objective, const FdOracleConfig& config);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double half_width = 0.0;  // 95% Student-t half-width of the slope
  std::size_t clamped = 0;  // ordinates raised to 1e-16 before taking logs
};

/// Least-squares slope of log(y) against log(x).
[[nodiscard]] SlopeFit slope_fit(std::span<const double> x, std::span<const double> y);

inline constexpr std::size_t kMinStudyPoints = 3;

struct ConvergenceStudy {
  std::string abscissa;  // "T" or "dt"
  std::string ordinate;  // what was averaged
  std::vector<double> abscissae;
  std::vector<double> ordinates;
  std::vector<double> stderrs;
  std::vector<Estimate> sensitivities;  // per abscissa, ensemble of dJ/ds
  SlopeFit fit;

  /// Throws ContractViolation with fewer than kMinStudyPoints or non-monotone abscissae.
  void validate() const;
};

struct EnsembleSpec {
  std::size_t members = 10;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  AlgorithmChoice algorithm = AlgorithmChoice::automatic;
};

/// Mean |dJ/ds - reference| against T. Each member reuses one trajectory for every T.
[[nodiscard]] ConvergenceStudy sensitivity_error_study(const ButcherTableau& tableau, const DynamicalSystem& system,
                                                       const Objective& objective, const MarchConfig& base,
                                                       const std::vector<double>& horizons, double reference,
                                                       const EnsembleSpec& ensemble);

/// Mean |(1/T) integral psi^T f dt| against dt at fixed T.
[[nodiscard]] ConvergenceStudy neutral_defect_study(const ButcherTableau& tableau, const DynamicalSystem& system,
                                                    const Objective& objective, const MarchConfig& base,
                                                    const std::vector<double>& steps, const EnsembleSpec& ensemble);

/// Ensemble of full runs at one configuration.
[[nodiscard]] std::vector<SensitivityReport> ensemble_runs(const ButcherTableau& tableau,
                                                           const DynamicalSystem& system, const Objective& objective,
                                                           const MarchConfig& config, const EnsembleSpec& ensemble);

}  // namespace shadow
