#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "shadow/dynamics.hpp"
#include "shadow/types.hpp"

namespace shadow {

/// Explicit Runge-Kutta scheme. a is strictly lower triangular.
struct ButcherTableau {
  std::string name;
  int order = 0;
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  std::vector<double> c;

  [[nodiscard]] std::size_t stages() const noexcept { return b.size(); }
  /// Throws ContractViolation unless a is strictly lower triangular, sum(b) = 1 and c_i = sum_j a_ij.
  void validate() const;

  static ButcherTableau classical_rk4();
  /// Ralston's third-order scheme (minimum local error bound).
  static ButcherTableau ralston_rk3();
  /// Lookup by name: "rk4" or "ralston3".
  static ButcherTableau by_name(const std::string& name);
};

/// Primal solution u_0..u_N at t_i = start_time + i*dt, one snapshot per column.
struct TrajectoryStore {
  double start_time = 0.0;
  double dt = 0.0;
  Matrix states;

  [[nodiscard]] std::size_t dimension() const noexcept { return static_cast<std::size_t>(states.rows()); }
  [[nodiscard]] std::size_t steps() const noexcept {
    return states.cols() > 0 ? static_cast<std::size_t>(states.cols()) - 1 : 0;
  }
  [[nodiscard]] double time(std::size_t i) const noexcept { return start_time + static_cast<double>(i) * dt; }
  [[nodiscard]] Vector state(std::size_t i) const { return states.col(static_cast<Eigen::Index>(i)); }
};

/// Stage states Y_k of one explicit RK step from u.
[[nodiscard]] std::vector<Vector> stage_states(const ButcherTableau& tableau, const DynamicalSystem& system,
                                               const Vector& u, double s, double dt);

/// One explicit RK step. Throws IntegrationDiverged (carrying step_index) on a non-finite result.
[[nodiscard]] Vector primal_step(const ButcherTableau& tableau, const DynamicalSystem& system, const Vector& u,
                                 double s, double dt, std::size_t step_index = 0);

/// Advances u0 by `steps` steps without storing the path.
[[nodiscard]] Vector advance(const ButcherTableau& tableau, const DynamicalSystem& system, Vector u, double s,
                             double dt, std::size_t steps);

/// Stores every step; steps == 0 yields a store holding only u0.
[[nodiscard]] TrajectoryStore integrate_primal(const ButcherTableau& tableau, const DynamicalSystem& system,
                                               const Vector& u0, double s, double dt, std::size_t steps,
                                               double start_time = 0.0);

/**
 * Linearization of a single primal step u_n -> u_{n+1}.
 *
 * Stage states are replayed from u_n with the same arithmetic as primal_step, so the
 * Jacobians belong exactly to the stored discrete trajectory. `adjoint` is the exact
 * transpose of `tangent`; with a source it adds the stage-weighted objective gradient
 * dt * b_k * J_u(Y_k).
 */
class StepLinearization {
 public:
  StepLinearization(const ButcherTableau& tableau, const DynamicalSystem& system, const Objective* objective,
                    const Vector& u_n, double s, double dt);

  /// psi_{n+1} -> psi_n in place.
  void adjoint(Vector& psi, bool include_source) const;
  /// v_n -> v_{n+1} in place.
  void tangent(Vector& v) const;

 private:
  const ButcherTableau* tableau_;
  double dt_;
  std::vector<BandedMatrix> jacobians_;
  std::vector<Vector> source_;  // J_u(Y_k), empty without an objective
};

/// Convenience wrapper around StepLinearization::adjoint. Throws IntegrationDiverged on a non-finite result.
[[nodiscard]] Vector adjoint_step(const ButcherTableau& tableau, const DynamicalSystem& system,
                                  const Objective* objective, const Vector& u_n, double s, double dt,
                                  const Vector& psi_next, bool include_source);

/// Result of sweeping m homogeneous columns and one forced column over a window.
struct BundleResult {
  Matrix Y;            // homogeneous columns at the lower end
  Vector v;            // forced column at the lower end
  Vector d;            // Simpson integral of Y^T f_s
  double h = 0.0;      // Simpson integral of v^T f_s
  Vector y_flow;       // Simpson integral of Y^T f
  double v_flow = 0.0; // Simpson integral of v^T f
};

/// Called at every snapshot of a bundle sweep (from the top of the window down) with the
/// homogeneous columns and the forced column at that snapshot.
using BundleObserver = std::function<void(std::size_t step, const std::vector<Vector>& columns, const Vector& forced)>;

/**
 * Integrates the homogeneous adjoint (columns of y_terminal) and the adjoint with the
 * objective source (v_terminal) backward from snapshot step_hi to step_lo.
 *
 * The window must contain an even number of steps (composite Simpson). Every column
 * goes through the same scalar arithmetic, so column j is bitwise equal to a
 * single-column run started from y_terminal.col(j).
 */
[[nodiscard]] BundleResult integrate_adjoint_bundle(const ButcherTableau& tableau, const DynamicalSystem& system,
                                                    const Objective& objective, const TrajectoryStore& trajectory,
                                                    double s, std::size_t step_hi, std::size_t step_lo,
                                                    const Matrix& y_terminal, const Vector& v_terminal,
                                                    const BundleObserver& observer = {});

/// Homogeneous adjoint only (no forced column, no integrals), from step_hi down to step_lo.
[[nodiscard]] Matrix propagate_homogeneous(const ButcherTableau& tableau, const DynamicalSystem& system,
                                           const TrajectoryStore& trajectory, double s, std::size_t step_hi,
                                           std::size_t step_lo, const Matrix& y_terminal);

/// Time-window form; throws ContractViolation unless both ends fall on trajectory steps.
[[nodiscard]] BundleResult integrate_adjoint_bundle(const ButcherTableau& tableau, const DynamicalSystem& system,
                                                    const Objective& objective, const TrajectoryStore& trajectory,
                                                    double s, double t_hi, double t_lo, const Matrix& y_terminal,
                                                    const Vector& v_terminal);

/// Index of the snapshot at time t; throws ContractViolation when t is off-grid or outside the store.
[[nodiscard]] std::size_t step_index_of(const TrajectoryStore& trajectory, double t);

/// Composite Simpson weight (without the dt/3 factor) of local node l in a window of `count` steps.
[[nodiscard]] inline double simpson_weight(std::size_t l, std::size_t count) noexcept {
  if (l == 0 || l == count) return 1.0;
  return (l % 2 == 1) ? 4.0 : 2.0;
}

/// Composite Simpson integral of g(u_i) over snapshots [lo, hi] (hi - lo even).
template <class Fn>
[[nodiscard]] double simpson_over_steps(const TrajectoryStore& trajectory, std::size_t lo, std::size_t hi, Fn&& g) {
  const std::size_t count = hi - lo;
  double acc = 0.0;
  for (std::size_t l = 0; l <= count; ++l) acc += simpson_weight(l, count) * g(trajectory.state(lo + l));
  return acc * trajectory.dt / 3.0;
}

}  // namespace shadow
