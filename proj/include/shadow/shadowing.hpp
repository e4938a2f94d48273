#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "shadow/dynamics.hpp"
#include "shadow/integrators.hpp"
#include "shadow/types.hpp"

namespace shadow {

/**
 * Time discretization of one stabilized-march run.
 *
 * The production window [0, T] is split into K = T/segment segments, each holding an
 * even number of integrator steps. The primal is spun up for spinup_initial before t = 0,
 * and the homogeneous adjoint for spinup_final (a whole number of segments) after T.
 */
struct MarchConfig {
  double T = 0.0;
  double segment = 0.0;
  double dt = 0.0;
  std::size_t m = 1;
  double spinup_initial = 0.0;
  double spinup_final = 0.0;
  /// Exponents above this count as unstable; unset means 0.05 * max(1, lambda_1).
  std::optional<double> tol_neutral;
  std::uint64_t seed = 0;

  /// Throws ContractViolation on any violated invariant. `n` is the state dimension;
  /// marches need m < n, spectrum-only sweeps (allow_full_basis) accept m == n.
  void validate(std::size_t n, bool allow_full_basis = false) const;

  [[nodiscard]] std::size_t segments() const;
  [[nodiscard]] std::size_t steps_per_segment() const;
  [[nodiscard]] std::size_t production_steps() const;
  [[nodiscard]] std::size_t spinup_initial_steps() const;
  [[nodiscard]] std::size_t spinup_final_steps() const;
  [[nodiscard]] std::size_t stored_steps() const { return production_steps() + spinup_final_steps(); }
};

/// Segment i covers [t_{i-1}, t_i].
struct SegmentRecord {
  std::size_t index = 0;
  Matrix Q;         // Q_i, orthonormal basis at t_i
  Matrix R;         // R_{i-1}: Y_i(t_{i-1}) = Q_{i-1} R_{i-1}
  Vector b;         // b_{i-1} = -Q_{i-1}^T v_i(t_{i-1})
  Vector gamma;     // gamma_i = v_i(t_i)
  Vector d;         // integral of Y_i^T f_s over the segment
  double h = 0.0;   // integral of v_i^T f_s
  Vector y_flow;    // integral of Y_i^T f
  double v_flow = 0.0;  // integral of v_i^T f
};

struct SweepResult {
  std::vector<SegmentRecord> segments;  // segments[i - 1] is segment i
  Matrix Q0;
  Vector gamma0;
  double J_bar = 0.0;
  double Js_integral = 0.0;
  double T = 0.0;
  std::size_t m = 0;
  bool has_particular = true;

  [[nodiscard]] std::size_t K() const noexcept { return segments.size(); }
  /// Q_i for i = 0..K.
  [[nodiscard]] const Matrix& Q(std::size_t i) const { return i == 0 ? Q0 : segments[i - 1].Q; }
  /// gamma_i for i = 0..K.
  [[nodiscard]] const Vector& gamma(std::size_t i) const { return i == 0 ? gamma0 : segments[i - 1].gamma; }
};

struct LyapunovSpectrum {
  std::vector<double> exponents;
  std::size_t K = 0;
  double T = 0.0;
  /// Indices j where exponents[j] > exponents[j-1] + noise (flagged, not fatal).
  std::vector<std::size_t> order_violations;
};

enum class MarchAlgorithm { exact, split };

struct MarchSolution {
  MarchAlgorithm algorithm = MarchAlgorithm::exact;
  std::size_t n_unstable = 0;
  std::vector<Vector> a;  // a_0..a_K
  double sensitivity = 0.0;
  double J_bar = 0.0;
  double neutral_defect = 0.0;     // |(1/T) integral psi^T f|
  double max_adjoint_norm = 0.0;   // over segment boundaries
  std::size_t triangular_flops = 0;
};

inline constexpr double kFlowFloor = 1e-8;

/// gamma_K = (J_bar - J(u_T)) f(u_T) / |f(u_T)|^2. Throws NearEquilibrium when |f| <= kFlowFloor.
[[nodiscard]] Vector terminal_particular(const DynamicalSystem& system, const Objective& objective,
                                         const Vector& u_T, double s, double J_bar);

/// n x m orthonormal basis orthogonal to f(u_end): QR of [f, W] with Gaussian W, first column dropped.
[[nodiscard]] Matrix seed_unstable_basis(const DynamicalSystem& system, const Vector& u_end, double s, std::size_t m,
                                         std::uint64_t seed);

/// n x m orthonormal basis from a Gaussian draw, with no constraint against f.
[[nodiscard]] Matrix seed_random_basis(std::size_t n, std::size_t m, std::uint64_t seed);

enum class SweepMode {
  /// Full backward sweep: homogeneous bundle plus particular solution.
  march,
  /// Homogeneous bundle only, seeded without the flow constraint (m == n allowed).
  spectrum,
};

/**
 * Backward adjoint sweep over a trajectory stored on [0, T + spinup_final].
 *
 * The seed basis is spun up from T + spinup_final to T with a QR every segment, then every
 * production segment i = K..1 evolves Y_i from Q_i and v_i from gamma_i, factors
 * Y_i(t_{i-1}) = Q_{i-1} R_{i-1}, and splits v_i(t_{i-1}) into -Q_{i-1} b_{i-1} + gamma_{i-1}.
 */
[[nodiscard]] SweepResult backward_sweep(const ButcherTableau& tableau, const DynamicalSystem& system,
                                         const Objective& objective, const TrajectoryStore& trajectory,
                                         const MarchConfig& config, SweepMode mode = SweepMode::march);

/// lambda_j = (1/T) sum_i ln |[R_{i-1}]_jj|. Throws RankDeficient on a zero diagonal.
[[nodiscard]] LyapunovSpectrum lyapunov_exponents(const std::vector<SegmentRecord>& segments, double T);

[[nodiscard]] double default_tol_neutral(const LyapunovSpectrum& spectrum);

/// Number of leading exponents above tol (never throws).
[[nodiscard]] std::size_t count_unstable(const LyapunovSpectrum& spectrum, double tol);

/// As count_unstable, but throws SubspaceOverflow when every tracked exponent is unstable.
[[nodiscard]] std::size_t classify_unstable(const LyapunovSpectrum& spectrum, double tol);

/// Forward march R_{i-1} a_i = a_{i-1} + b_{i-1} from a_0 = 0 (all m modes taken as unstable).
[[nodiscard]] MarchSolution march_exact(const SweepResult& sweep);

/**
 * Split march for m > n_u: stable/neutral coefficients are marched backward from
 * a_K^s = 0 by matrix-vector products, then the unstable block is solved forward from
 * a_0^u = 0 with the coupling term moved to the right-hand side.
 */
[[nodiscard]] MarchSolution march_split(const SweepResult& sweep, std::size_t n_unstable);

/// Classifies the spectrum with tol_neutral and runs the split march.
[[nodiscard]] MarchSolution march_split(const SweepResult& sweep, const LyapunovSpectrum& spectrum,
                                        double tol_neutral);

/// Fills sensitivity, J_bar, neutral defect and boundary norms from the coefficients.
void assemble_solution(const SweepResult& sweep, MarchSolution& solution);

struct AdjointReconstruction {
  std::vector<std::size_t> sample_steps;
  Matrix samples;                      // psi at sample_steps, one per column
  double neutral_defect = 0.0;         // |(1/T) integral psi^T f|, Simpson over steps
  double max_norm = 0.0;               // over every step of [0, T]
  double max_flow_residual = 0.0;      // max |psi^T f + J - J_bar|
  double terminal_flow_residual = 0.0; // |psi(T)^T f(T) - (J_bar - J(T))|
  double max_continuity_mismatch = 0.0;  // relative, over interior boundaries
};

/// Re-runs each segment bundle and superposes psi = Y_i a_i + v_i.
[[nodiscard]] AdjointReconstruction reconstruct_adjoint(const ButcherTableau& tableau, const DynamicalSystem& system,
                                                        const Objective& objective,
                                                        const TrajectoryStore& trajectory, const MarchConfig& config,
                                                        const SweepResult& sweep, const MarchSolution& solution,
                                                        const std::vector<std::size_t>& sample_steps);

/// |psi(0)| for the conventional adjoint with psi(T) = 0 and no shadowing correction.
[[nodiscard]] double conventional_adjoint_norm(const ButcherTableau& tableau, const DynamicalSystem& system,
                                               const Objective& objective, const TrajectoryStore& trajectory,
                                               std::size_t step_T);

/// Composite Simpson time average of J over [0, T] and the integral of J_s.
struct OutputAverages {
  double J_bar = 0.0;
  double Js_integral = 0.0;
};
[[nodiscard]] OutputAverages output_averages(const DynamicalSystem& system, const Objective& objective,
                                             const TrajectoryStore& trajectory, std::size_t step_T);

}  // namespace shadow
