#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "shadow/types.hpp"

namespace shadow {

/**
 * Square matrix with `lower` sub-diagonals and `upper` super-diagonals.
 *
 * Jacobians of both bundled systems are stored this way: the Kuramoto-Sivashinsky
 * stencil has bandwidth 2, and the 3x3 Lorenz Jacobian is simply a full band.
 * Entries outside the band are identically zero.
 */
class BandedMatrix {
 public:
  BandedMatrix(std::size_t n, std::size_t lower, std::size_t upper);

  [[nodiscard]] std::size_t rows() const noexcept { return n_; }
  [[nodiscard]] std::size_t lower() const noexcept { return lower_; }
  [[nodiscard]] std::size_t upper() const noexcept { return upper_; }

  /// Mutable access; (i, j) must lie inside the band.
  double& at(std::size_t i, std::size_t j);
  /// Returns 0 outside the band.
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const;

  /// y = A x
  void apply(const Vector& x, Vector& y) const;
  /// y = A^T x
  void apply_transpose(const Vector& x, Vector& y) const;

  [[nodiscard]] Matrix dense() const;

 private:
  std::size_t n_;
  std::size_t lower_;
  std::size_t upper_;
  std::size_t width_;
  std::vector<double> band_;  // row-major, row i holds columns i-lower .. i+upper
};

struct SystemInfo {
  std::string name;
  std::string description;
};

/// du/dt = f(u, s) together with its first derivatives.
class DynamicalSystem {
 public:
  virtual ~DynamicalSystem() = default;

  [[nodiscard]] virtual std::size_t dimension() const = 0;
  [[nodiscard]] virtual const SystemInfo& info() const = 0;
  /// Design parameter value the system was configured with.
  [[nodiscard]] virtual double parameter() const = 0;
  /// Same system with the design parameter replaced.
  [[nodiscard]] virtual std::unique_ptr<DynamicalSystem> with_parameter(double s) const = 0;

  virtual void rhs(const Vector& u, double s, Vector& out) const = 0;
  [[nodiscard]] virtual BandedMatrix jacobian(const Vector& u, double s) const = 0;
  virtual void dfds(const Vector& u, double s, Vector& out) const = 0;

  /// Uniform draw from the box used to seed ensemble trajectories.
  [[nodiscard]] virtual Vector sample_initial_state(std::mt19937_64& rng) const = 0;
};

// Checked entry points. All of them throw ContractViolation on a length mismatch.
[[nodiscard]] Vector rhs(const DynamicalSystem& system, const Vector& u, double s);
[[nodiscard]] Vector jacobian_apply(const DynamicalSystem& system, const Vector& u, double s, const Vector& v);
[[nodiscard]] Vector jacobian_transpose_apply(const DynamicalSystem& system, const Vector& u, double s,
                                              const Vector& w);
[[nodiscard]] Vector dfds(const DynamicalSystem& system, const Vector& u, double s);

void require_dimension(const DynamicalSystem& system, const Vector& v, const char* what);

/// Instantaneous output J(u, s) with its derivatives.
struct Objective {
  std::string name;
  std::function<double(const Vector&, double)> value;
  std::function<void(const Vector&, double, Vector&)> gradient;
  std::function<double(const Vector&, double)> parameter_derivative;

  [[nodiscard]] Vector state_gradient(const Vector& u, double s) const {
    Vector g(u.size());
    gradient(u, s, g);
    return g;
  }
};

// ---------------------------------------------------------------------------
// Lorenz 63 with the z-shift parameter:
//   x' = sigma (y - x),  y' = x (rho - (z - s)) - y,  z' = x y - beta (z - s)

struct Lorenz63Params {
  double sigma = 10.0;
  double rho = 25.0;
  double beta = 8.0 / 3.0;
  double s = 0.0;
};

class Lorenz63 final : public DynamicalSystem {
 public:
  explicit Lorenz63(Lorenz63Params params = {});

  [[nodiscard]] std::size_t dimension() const override { return 3; }
  [[nodiscard]] const SystemInfo& info() const override { return info_; }
  [[nodiscard]] double parameter() const override { return params_.s; }
  [[nodiscard]] std::unique_ptr<DynamicalSystem> with_parameter(double s) const override;
  [[nodiscard]] const Lorenz63Params& params() const noexcept { return params_; }

  void rhs(const Vector& u, double s, Vector& out) const override;
  [[nodiscard]] BandedMatrix jacobian(const Vector& u, double s) const override;
  void dfds(const Vector& u, double s, Vector& out) const override;
  [[nodiscard]] Vector sample_initial_state(std::mt19937_64& rng) const override;

 private:
  Lorenz63Params params_;
  SystemInfo info_;
};

/// J = z.
[[nodiscard]] Objective lorenz_objective();

// ---------------------------------------------------------------------------
// Kuramoto-Sivashinsky on [0, L] with u = u_x = 0 at both walls:
//   u_t = -(u + s) u_x - u_xx - u_xxxx
// Second-order central differences on the interior nodes x_i = i dx, i = 1..n.
// Wall values are pinned to zero and the ghost nodes mirror the first interior
// node (u_{-1} = u_1, u_{n+2} = u_n) so the one-sided slope vanishes.

/// Discretization of u u_x: w * (u_{i+1} - u_{i-1}) / 2dx with w = alpha u_i + beta (u_{i+1} + u_{i-1}).
enum class KSAdvection {
  advective,     // w = u_i
  conservative,  // w = (u_{i+1} + u_{i-1}) / 2, i.e. central (u^2/2)_x
  skew           // w = (u_{i+1} + u_i + u_{i-1}) / 3, conserves sum u_i^2
};

[[nodiscard]] KSAdvection parse_ks_advection(const std::string& name);
[[nodiscard]] std::string to_string(KSAdvection form);

struct KSGrid {
  double length = 128.0;
  double dx = 1.0;
  double s = 0.0;
  KSAdvection advection = KSAdvection::skew;

  /// L/dx - 1; throws ContractViolation unless L/dx is an integer >= 4.
  [[nodiscard]] std::size_t interior_nodes() const;
};

class KuramotoSivashinsky final : public DynamicalSystem {
 public:
  explicit KuramotoSivashinsky(KSGrid grid = {});

  [[nodiscard]] std::size_t dimension() const override { return n_; }
  [[nodiscard]] const SystemInfo& info() const override { return info_; }
  [[nodiscard]] double parameter() const override { return grid_.s; }
  [[nodiscard]] std::unique_ptr<DynamicalSystem> with_parameter(double s) const override;
  [[nodiscard]] const KSGrid& grid() const noexcept { return grid_; }

  void rhs(const Vector& u, double s, Vector& out) const override;
  [[nodiscard]] BandedMatrix jacobian(const Vector& u, double s) const override;
  void dfds(const Vector& u, double s, Vector& out) const override;
  [[nodiscard]] Vector sample_initial_state(std::mt19937_64& rng) const override;

 private:
  KSGrid grid_;
  std::size_t n_;
  SystemInfo info_;
};

/// J = (1/L) * trapezoidal integral of u over [0, L]; the wall values are zero.
[[nodiscard]] Objective ks_objective(const KSGrid& grid);

}  // namespace shadow
