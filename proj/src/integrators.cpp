#include "shadow/integrators.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "shadow/errors.hpp"

namespace shadow {

void ButcherTableau::validate() const {
  const std::size_t ns = stages();
  if (ns == 0 || a.size() != ns || c.size() != ns) throw ContractViolation(name + ": inconsistent tableau sizes");
  for (std::size_t i = 0; i < ns; ++i) {
    if (a[i].size() != ns) throw ContractViolation(name + ": row " + std::to_string(i) + " has wrong length");
    double row = 0.0;
    for (std::size_t j = 0; j < ns; ++j) {
      if (j >= i && a[i][j] != 0.0) throw ContractViolation(name + ": a is not strictly lower triangular");
      row += a[i][j];
    }
    if (std::abs(row - c[i]) > 1e-14) throw ContractViolation(name + ": c_i != sum_j a_ij");
  }
  const double sum_b = std::accumulate(b.begin(), b.end(), 0.0);
  if (std::abs(sum_b - 1.0) > 1e-14) throw ContractViolation(name + ": weights do not sum to one");
}

ButcherTableau ButcherTableau::classical_rk4() {
  ButcherTableau t;
  t.name = "rk4";
  t.order = 4;
  t.a = {{0.0, 0.0, 0.0, 0.0}, {0.5, 0.0, 0.0, 0.0}, {0.0, 0.5, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}};
  t.b = {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
  t.c = {0.0, 0.5, 0.5, 1.0};
  return t;
}

ButcherTableau ButcherTableau::ralston_rk3() {
  ButcherTableau t;
  t.name = "ralston3";
  t.order = 3;
  t.a = {{0.0, 0.0, 0.0}, {0.5, 0.0, 0.0}, {0.0, 0.75, 0.0}};
  t.b = {2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0};
  t.c = {0.0, 0.5, 0.75};
  return t;
}

ButcherTableau ButcherTableau::by_name(const std::string& name) {
  if (name == "rk4") return classical_rk4();
  if (name == "ralston3") return ralston_rk3();
  throw ContractViolation("unknown integrator '" + name + "' (expected rk4 or ralston3)");
}

namespace {

// Y_k and f(Y_k) for one step; shared by the primal step and the linearization replay.
void compute_stages(const ButcherTableau& tab, const DynamicalSystem& system, const Vector& u, double s, double dt,
                    std::vector<Vector>& y, std::vector<Vector>& k) {
  const std::size_t ns = tab.stages();
  y.resize(ns);
  k.resize(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    y[i] = u;
    for (std::size_t j = 0; j < i; ++j) {
      if (tab.a[i][j] != 0.0) y[i] += (dt * tab.a[i][j]) * k[j];
    }
    k[i].resize(u.size());
    system.rhs(y[i], s, k[i]);
  }
}

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

std::vector<Vector> stage_states(const ButcherTableau& tableau, const DynamicalSystem& system, const Vector& u,
                                 double s, double dt) {
  require_dimension(system, u, "stage_states(u)");
  std::vector<Vector> y, k;
  compute_stages(tableau, system, u, s, dt, y, k);
  return y;
}

Vector primal_step(const ButcherTableau& tableau, const DynamicalSystem& system, const Vector& u, double s,
                   double dt, std::size_t step_index) {
  require_dimension(system, u, "primal_step(u)");
  if (!(dt > 0.0)) throw ContractViolation("primal_step: dt must be positive");
  std::vector<Vector> y, k;
  compute_stages(tableau, system, u, s, dt, y, k);
  Vector next = u;
  for (std::size_t i = 0; i < tableau.stages(); ++i) next += (dt * tableau.b[i]) * k[i];
  if (!all_finite(next)) throw IntegrationDiverged("primal integration produced a non-finite state", step_index);
  return next;
}

Vector advance(const ButcherTableau& tableau, const DynamicalSystem& system, Vector u, double s, double dt,
               std::size_t steps) {
  for (std::size_t i = 0; i < steps; ++i) u = primal_step(tableau, system, u, s, dt, i);
  return u;
}

TrajectoryStore integrate_primal(const ButcherTableau& tableau, const DynamicalSystem& system, const Vector& u0,
                                 double s, double dt, std::size_t steps, double start_time) {
  require_dimension(system, u0, "integrate_primal(u0)");
  TrajectoryStore store;
  store.start_time = start_time;
  store.dt = dt;
  store.states.resize(u0.size(), static_cast<Eigen::Index>(steps + 1));
  store.states.col(0) = u0;
  Vector u = u0;
  for (std::size_t i = 0; i < steps; ++i) {
    u = primal_step(tableau, system, u, s, dt, i);
    store.states.col(static_cast<Eigen::Index>(i + 1)) = u;
  }
  return store;
}

StepLinearization::StepLinearization(const ButcherTableau& tableau, const DynamicalSystem& system,
                                     const Objective* objective, const Vector& u_n, double s, double dt)
    : tableau_(&tableau), dt_(dt) {
  std::vector<Vector> y, k;
  compute_stages(tableau, system, u_n, s, dt, y, k);
  jacobians_.reserve(y.size());
  for (const auto& stage : y) jacobians_.push_back(system.jacobian(stage, s));
  if (objective) {
    source_.reserve(y.size());
    for (const auto& stage : y) source_.push_back(objective->state_gradient(stage, s));
  }
}

void StepLinearization::adjoint(Vector& psi, bool include_source) const {
  const auto& tab = *tableau_;
  const std::size_t ns = tab.stages();
  if (include_source && source_.empty()) throw ContractViolation("adjoint step with source needs an objective");
  thread_local std::vector<Vector> lambda;
  thread_local Vector w;
  lambda.resize(ns);
  for (std::size_t kk = ns; kk-- > 0;) {
    w = tab.b[kk] * psi;
    for (std::size_t j = kk + 1; j < ns; ++j) {
      if (tab.a[j][kk] != 0.0) w += tab.a[j][kk] * lambda[j];
    }
    jacobians_[kk].apply_transpose(w, lambda[kk]);
    lambda[kk] *= dt_;
    if (include_source) lambda[kk] += (dt_ * tab.b[kk]) * source_[kk];
  }
  for (std::size_t kk = 0; kk < ns; ++kk) psi += lambda[kk];
}

void StepLinearization::tangent(Vector& v) const {
  const auto& tab = *tableau_;
  const std::size_t ns = tab.stages();
  std::vector<Vector> dk(ns);
  Vector dy;
  for (std::size_t i = 0; i < ns; ++i) {
    dy = v;
    for (std::size_t j = 0; j < i; ++j) {
      if (tab.a[i][j] != 0.0) dy += (dt_ * tab.a[i][j]) * dk[j];
    }
    jacobians_[i].apply(dy, dk[i]);
  }
  for (std::size_t i = 0; i < ns; ++i) v += (dt_ * tab.b[i]) * dk[i];
}

Vector adjoint_step(const ButcherTableau& tableau, const DynamicalSystem& system, const Objective* objective,
                    const Vector& u_n, double s, double dt, const Vector& psi_next, bool include_source) {
  require_dimension(system, u_n, "adjoint_step(u_n)");
  require_dimension(system, psi_next, "adjoint_step(psi)");
  StepLinearization lin(tableau, system, objective, u_n, s, dt);
  Vector psi = psi_next;
  lin.adjoint(psi, include_source);
  if (!all_finite(psi)) throw IntegrationDiverged("adjoint integration produced a non-finite value", 0);
  return psi;
}

std::size_t step_index_of(const TrajectoryStore& trajectory, double t) {
  const double x = (t - trajectory.start_time) / trajectory.dt;
  const double r = std::round(x);
  if (std::abs(x - r) > 1e-8 * std::max(1.0, std::abs(x)) || r < 0.0 ||
      r > static_cast<double>(trajectory.steps())) {
    throw ContractViolation("time " + std::to_string(t) + " is not a step of the stored trajectory");
  }
  return static_cast<std::size_t>(r);
}

BundleResult integrate_adjoint_bundle(const ButcherTableau& tableau, const DynamicalSystem& system,
                                      const Objective& objective, const TrajectoryStore& trajectory, double s,
                                      std::size_t step_hi, std::size_t step_lo, const Matrix& y_terminal,
                                      const Vector& v_terminal, const BundleObserver& observer) {
  if (step_hi < step_lo || step_hi > trajectory.steps()) {
    throw ContractViolation("integrate_adjoint_bundle: window outside the stored trajectory");
  }
  const std::size_t count = step_hi - step_lo;
  if (count % 2 != 0) throw ContractViolation("integrate_adjoint_bundle: window must hold an even number of steps");
  const auto n = static_cast<Eigen::Index>(system.dimension());
  if (y_terminal.rows() != n && y_terminal.cols() != 0) {
    throw ContractViolation("integrate_adjoint_bundle: terminal matrix has wrong row count");
  }
  require_dimension(system, v_terminal, "integrate_adjoint_bundle(v_terminal)");

  const Eigen::Index m = y_terminal.cols();
  const double dt = trajectory.dt;
  std::vector<Vector> cols(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) cols[static_cast<std::size_t>(j)] = y_terminal.col(j);
  Vector v = v_terminal;

  BundleResult out;
  out.d = Vector::Zero(m);
  out.y_flow = Vector::Zero(m);
  Vector fs(n), f(n);

  auto accumulate = [&](std::size_t step) {
    const Vector u = trajectory.state(step);
    system.dfds(u, s, fs);
    system.rhs(u, s, f);
    const double w = simpson_weight(step - step_lo, count);
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& c = cols[static_cast<std::size_t>(j)];
      out.d[j] += w * c.dot(fs);
      out.y_flow[j] += w * c.dot(f);
    }
    out.h += w * v.dot(fs);
    out.v_flow += w * v.dot(f);
    if (observer) observer(step, cols, v);
  };

  accumulate(step_hi);
  for (std::size_t step = step_hi; step-- > step_lo;) {
    StepLinearization lin(tableau, system, &objective, trajectory.state(step), s, dt);
    for (auto& c : cols) {
      lin.adjoint(c, false);
      if (!all_finite(c)) throw IntegrationDiverged("homogeneous adjoint became non-finite", step);
    }
    lin.adjoint(v, true);
    if (!all_finite(v)) throw IntegrationDiverged("forced adjoint became non-finite", step);
    accumulate(step);
  }

  const double scale = dt / 3.0;
  out.d *= scale;
  out.y_flow *= scale;
  out.h *= scale;
  out.v_flow *= scale;
  out.Y.resize(n, m);
  for (Eigen::Index j = 0; j < m; ++j) out.Y.col(j) = cols[static_cast<std::size_t>(j)];
  out.v = std::move(v);
  return out;
}

Matrix propagate_homogeneous(const ButcherTableau& tableau, const DynamicalSystem& system,
                             const TrajectoryStore& trajectory, double s, std::size_t step_hi, std::size_t step_lo,
                             const Matrix& y_terminal) {
  if (step_hi < step_lo || step_hi > trajectory.steps()) {
    throw ContractViolation("propagate_homogeneous: window outside the stored trajectory");
  }
  const Eigen::Index m = y_terminal.cols();
  std::vector<Vector> cols(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) cols[static_cast<std::size_t>(j)] = y_terminal.col(j);
  for (std::size_t step = step_hi; step-- > step_lo;) {
    StepLinearization lin(tableau, system, nullptr, trajectory.state(step), s, trajectory.dt);
    for (auto& c : cols) {
      lin.adjoint(c, false);
      if (!all_finite(c)) throw IntegrationDiverged("homogeneous adjoint became non-finite", step);
    }
  }
  Matrix y(y_terminal.rows(), m);
  for (Eigen::Index j = 0; j < m; ++j) y.col(j) = cols[static_cast<std::size_t>(j)];
  return y;
}

BundleResult integrate_adjoint_bundle(const ButcherTableau& tableau, const DynamicalSystem& system,
                                      const Objective& objective, const TrajectoryStore& trajectory, double s,
                                      double t_hi, double t_lo, const Matrix& y_terminal,
                                      const Vector& v_terminal) {
  return integrate_adjoint_bundle(tableau, system, objective, trajectory, s, step_index_of(trajectory, t_hi),
                                  step_index_of(trajectory, t_lo), y_terminal, v_terminal);
}

}  // namespace shadow
