#pragma once

// Small fixtures shared by the unit and acceptance tests.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "shadow/dynamics.hpp"
#include "shadow/shadowing.hpp"

namespace shadow::testing {

/// du/dt = A u + s b with a dense A (stored as a full band).
class LinearSystem final : public DynamicalSystem {
 public:
  LinearSystem(Matrix a, Vector b, double s = 0.0)
      : a_(std::move(a)), b_(std::move(b)), s_(s), info_{"linear", "du/dt = A u + s b"} {}

  [[nodiscard]] std::size_t dimension() const override { return static_cast<std::size_t>(a_.rows()); }
  [[nodiscard]] const SystemInfo& info() const override { return info_; }
  [[nodiscard]] double parameter() const override { return s_; }
  [[nodiscard]] std::unique_ptr<DynamicalSystem> with_parameter(double s) const override {
    return std::make_unique<LinearSystem>(a_, b_, s);
  }
  void rhs(const Vector& u, double s, Vector& out) const override { out = a_ * u + s * b_; }
  [[nodiscard]] BandedMatrix jacobian(const Vector&, double) const override {
    const std::size_t n = dimension();
    BandedMatrix j(n, n - 1, n - 1);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) j.at(r, c) = a_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    return j;
  }
  void dfds(const Vector&, double, Vector& out) const override { out = b_; }
  [[nodiscard]] Vector sample_initial_state(std::mt19937_64& rng) const override {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Vector u(a_.rows());
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = d(rng);
    return u;
  }

 private:
  Matrix a_;
  Vector b_;
  double s_;
  SystemInfo info_;
};

inline LinearSystem scalar_system(double lambda) {
  return LinearSystem(Matrix::Constant(1, 1, lambda), Vector::Zero(1));
}

/// J = c, independent of u and s.
inline Objective constant_objective(double c) {
  Objective j;
  j.name = "constant";
  j.value = [c](const Vector&, double) { return c; };
  j.gradient = [](const Vector& u, double, Vector& g) { g.setZero(u.size()); };
  j.parameter_derivative = [](const Vector&, double) { return 0.0; };
  return j;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> d;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = d(rng);
  }
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n) { return random_matrix(rng, n, 1).col(0); }

/// Well-conditioned upper triangular matrix with positive diagonal.
inline Matrix random_upper(std::mt19937_64& rng, Eigen::Index m) {
  std::uniform_real_distribution<double> diag(0.5, 3.0);
  Matrix r = random_matrix(rng, m, m).triangularView<Eigen::StrictlyUpper>();
  for (Eigen::Index j = 0; j < m; ++j) r(j, j) = diag(rng);
  return r;
}

/// Sweep with given R_{i-1} and b_{i-1} and arbitrary (but consistent) remaining fields.
inline SweepResult synthetic_sweep(std::mt19937_64& rng, std::size_t K, std::size_t m, std::size_t n = 0) {
  if (n == 0) n = m + 2;
  SweepResult s;
  s.T = static_cast<double>(K);
  s.m = m;
  s.has_particular = true;
  s.J_bar = 0.25;
  s.Js_integral = 0.5;
  const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n);
  s.Q0 = random_matrix(rng, N, M).householderQr().householderQ() * Matrix::Identity(N, M);
  s.gamma0 = random_vector(rng, N);
  s.segments.resize(K);
  for (std::size_t i = 1; i <= K; ++i) {
    auto& rec = s.segments[i - 1];
    rec.index = i;
    rec.Q = random_matrix(rng, N, M).householderQr().householderQ() * Matrix::Identity(N, M);
    rec.R = random_upper(rng, M);
    rec.b = random_vector(rng, M);
    rec.gamma = random_vector(rng, N);
    rec.d = random_vector(rng, M);
    rec.h = random_vector(rng, 1)[0];
    rec.y_flow = random_vector(rng, M);
    rec.v_flow = random_vector(rng, 1)[0];
  }
  return s;
}

/// Synthetic sweep with an exponential dichotomy: the leading n_unstable diagonal entries of every
/// R lie in [1.2, 3] (growing backward), the rest in [0.2, 0.9].
inline SweepResult dichotomy_sweep(std::mt19937_64& rng, std::size_t K, std::size_t m, std::size_t n_unstable) {
  SweepResult s = synthetic_sweep(rng, K, m);
  std::uniform_real_distribution<double> grow(1.2, 3.0), decay(0.2, 0.9);
  for (auto& rec : s.segments) {
    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      rec.R(jj, jj) = j < n_unstable ? grow(rng) : decay(rng);
    }
  }
  return s;
}

inline double relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

/// Largest coefficient mismatch, relative to the largest coefficient norm of either solution.
inline double coefficient_error(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  double scale = 1e-300, worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max({scale, a[i].norm(), b[i].norm()});
    worst = std::max(worst, (a[i] - b[i]).norm());
  }
  return worst / scale;
}

}  // namespace shadow::testing
