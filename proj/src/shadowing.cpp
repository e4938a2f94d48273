#include "shadow/shadowing.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "shadow/errors.hpp"
#include "shadow/linalg.hpp"

namespace shadow {

namespace {

std::size_t integer_ratio(double num, double den, const char* what) {
  const double r = num / den;
  const double k = std::round(r);
  if (!std::isfinite(r) || k < 0.0 || std::abs(r - k) > 1e-9 * std::max(1.0, r)) {
    throw ContractViolation(std::string(what) + " must be an integer multiple (got ratio " + std::to_string(r) + ")");
  }
  return static_cast<std::size_t>(k);
}

}  // namespace

void MarchConfig::validate(std::size_t n, bool allow_full_basis) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractViolation("dt must be positive");
  if (!(segment > 0.0) || !std::isfinite(segment)) throw ContractViolation("segment length must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw ContractViolation("integration length T must be positive");
  if (!(spinup_initial >= 0.0) || !(spinup_final >= 0.0)) throw ContractViolation("spin-up times must be >= 0");
  const std::size_t per_segment = integer_ratio(segment, dt, "segment / dt");
  if (per_segment == 0 || per_segment % 2 != 0) {
    throw ContractViolation("segment / dt must be an even positive integer (got " + std::to_string(per_segment) + ")");
  }
  if (integer_ratio(T, segment, "T / segment") == 0) throw ContractViolation("T must hold at least one segment");
  integer_ratio(spinup_final, segment, "spinup_final / segment");
  integer_ratio(spinup_initial, dt, "spinup_initial / dt");
  if (m < 1) throw ContractViolation("m must be >= 1");
  if (allow_full_basis ? m > n : m >= n) {
    throw ContractViolation("m = " + std::to_string(m) + " is too large for state dimension " + std::to_string(n));
  }
  if (tol_neutral && (!std::isfinite(*tol_neutral) || *tol_neutral < 0.0)) {
    throw ContractViolation("tol_neutral must be a finite nonnegative number");
  }
}

std::size_t MarchConfig::segments() const { return integer_ratio(T, segment, "T / segment"); }
std::size_t MarchConfig::steps_per_segment() const { return integer_ratio(segment, dt, "segment / dt"); }
std::size_t MarchConfig::production_steps() const { return segments() * steps_per_segment(); }
std::size_t MarchConfig::spinup_initial_steps() const { return integer_ratio(spinup_initial, dt, "spinup_initial / dt"); }
std::size_t MarchConfig::spinup_final_steps() const {
  return integer_ratio(spinup_final, segment, "spinup_final / segment") * steps_per_segment();
}

Vector terminal_particular(const DynamicalSystem& system, const Objective& objective, const Vector& u_T, double s,
                           double J_bar) {
  const Vector f = rhs(system, u_T, s);
  const double norm2 = f.squaredNorm();
  if (!(std::sqrt(norm2) > kFlowFloor)) {
    throw NearEquilibrium("terminal state is within " + std::to_string(kFlowFloor) + " of an equilibrium");
  }
  return ((J_bar - objective.value(u_T, s)) / norm2) * f;
}

namespace {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix w(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = normal(rng);
  }
  return w;
}

constexpr int kSeedRetries = 3;
constexpr std::uint64_t kReseedStride = 0x9E3779B97F4A7C15ULL;

}  // namespace

Matrix seed_unstable_basis(const DynamicalSystem& system, const Vector& u_end, double s, std::size_t m,
                           std::uint64_t seed) {
  const std::size_t n = system.dimension();
  if (m + 1 > n) throw ContractViolation("seed_unstable_basis: need m + 1 <= n");
  const Vector f = rhs(system, u_end, s);
  for (int attempt = 0;; ++attempt) {
    Matrix aug(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m + 1));
    aug.col(0) = f;
    aug.rightCols(static_cast<Eigen::Index>(m)) = gaussian_matrix(n, m, seed + attempt * kReseedStride);
    try {
      return thin_qr(aug).Q.rightCols(static_cast<Eigen::Index>(m));
    } catch (const RankDeficient&) {
      if (attempt >= kSeedRetries) throw;
    }
  }
}

Matrix seed_random_basis(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (m > n) throw ContractViolation("seed_random_basis: need m <= n");
  for (int attempt = 0;; ++attempt) {
    try {
      return thin_qr(gaussian_matrix(n, m, seed + attempt * kReseedStride)).Q;
    } catch (const RankDeficient&) {
      if (attempt >= kSeedRetries) throw;
    }
  }
}

OutputAverages output_averages(const DynamicalSystem& system, const Objective& objective,
                               const TrajectoryStore& trajectory, std::size_t step_T) {
  if (step_T == 0 || step_T % 2 != 0 || step_T > trajectory.steps()) {
    throw ContractViolation("output_averages: need an even, positive step count inside the trajectory");
  }
  const double s = system.parameter();
  OutputAverages out;
  const double T = static_cast<double>(step_T) * trajectory.dt;
  out.J_bar = simpson_over_steps(trajectory, 0, step_T, [&](const Vector& u) { return objective.value(u, s); }) / T;
  out.Js_integral =
      simpson_over_steps(trajectory, 0, step_T, [&](const Vector& u) { return objective.parameter_derivative(u, s); });
  return out;
}

SweepResult backward_sweep(const ButcherTableau& tableau, const DynamicalSystem& system, const Objective& objective,
                           const TrajectoryStore& trajectory, const MarchConfig& config, SweepMode mode) {
  const std::size_t n = system.dimension();
  const bool march = mode == SweepMode::march;
  config.validate(n, !march);
  if (trajectory.dimension() != n) throw ContractViolation("backward_sweep: trajectory dimension mismatch");
  if (std::abs(trajectory.dt - config.dt) > 1e-12 * config.dt) {
    throw ContractViolation("backward_sweep: trajectory step differs from config dt");
  }
  const std::size_t S = config.steps_per_segment();
  const std::size_t K = config.segments();
  const std::size_t N = config.production_steps();
  const std::size_t top = config.stored_steps();
  if (trajectory.steps() < top) throw ContractViolation("backward_sweep: trajectory does not cover [0, T + T0f]");

  const double s = system.parameter();
  SweepResult out;
  out.T = config.T;
  out.m = config.m;
  out.has_particular = march;
  const auto averages = output_averages(system, objective, trajectory, N);
  out.J_bar = averages.J_bar;
  out.Js_integral = averages.Js_integral;

  const Vector u_top = trajectory.state(top);
  Matrix q = march ? seed_unstable_basis(system, u_top, s, config.m, config.seed)
                   : seed_random_basis(n, config.m, config.seed);
  for (std::size_t step = top; step > N; step -= S) {
    q = thin_qr(propagate_homogeneous(tableau, system, trajectory, s, step, step - S, q)).Q;
  }

  Vector gamma = march ? terminal_particular(system, objective, trajectory.state(N), s, out.J_bar)
                       : Vector::Zero(static_cast<Eigen::Index>(n));
  out.segments.resize(K);
  for (std::size_t i = K; i >= 1; --i) {
    SegmentRecord& rec = out.segments[i - 1];
    rec.index = i;
    rec.Q = q;
    rec.gamma = gamma;
    const std::size_t hi = i * S, lo = (i - 1) * S;
    if (march) {
      BundleResult bundle = integrate_adjoint_bundle(tableau, system, objective, trajectory, s, hi, lo, q, gamma);
      ThinQR qr = thin_qr(bundle.Y);
      rec.R = std::move(qr.R);
      rec.b = -(qr.Q.transpose() * bundle.v);
      gamma = bundle.v + qr.Q * rec.b;
      rec.d = std::move(bundle.d);
      rec.h = bundle.h;
      rec.y_flow = std::move(bundle.y_flow);
      rec.v_flow = bundle.v_flow;
      q = std::move(qr.Q);
    } else {
      ThinQR qr = thin_qr(propagate_homogeneous(tableau, system, trajectory, s, hi, lo, q));
      rec.R = std::move(qr.R);
      rec.b = Vector::Zero(static_cast<Eigen::Index>(config.m));
      rec.d = Vector::Zero(static_cast<Eigen::Index>(config.m));
      rec.y_flow = Vector::Zero(static_cast<Eigen::Index>(config.m));
      q = std::move(qr.Q);
    }
  }
  out.Q0 = std::move(q);
  out.gamma0 = std::move(gamma);
  return out;
}

LyapunovSpectrum lyapunov_exponents(const std::vector<SegmentRecord>& segments, double T) {
  if (segments.empty()) throw ContractViolation("lyapunov_exponents: need at least one segment");
  if (!(T > 0.0)) throw ContractViolation("lyapunov_exponents: T must be positive");
  const Eigen::Index m = segments.front().R.rows();
  LyapunovSpectrum out;
  out.K = segments.size();
  out.T = T;
  out.exponents.assign(static_cast<std::size_t>(m), 0.0);
  for (Eigen::Index j = 0; j < m; ++j) {
    double acc = 0.0;
    for (const auto& rec : segments) {
      const double r = std::abs(rec.R(j, j));
      if (!(r > 0.0)) throw RankDeficient(static_cast<std::size_t>(j));
      acc += std::log(r);
    }
    out.exponents[static_cast<std::size_t>(j)] = acc / T;
  }
  for (std::size_t j = 1; j < out.exponents.size(); ++j) {
    if (out.exponents[j] > out.exponents[j - 1] + 1e-9) out.order_violations.push_back(j);
  }
  return out;
}

double default_tol_neutral(const LyapunovSpectrum& spectrum) {
  const double lead = spectrum.exponents.empty() ? 0.0 : spectrum.exponents.front();
  return 0.05 * std::max(1.0, lead);
}

std::size_t count_unstable(const LyapunovSpectrum& spectrum, double tol) {
  std::size_t n_u = 0;
  while (n_u < spectrum.exponents.size() && spectrum.exponents[n_u] > tol) ++n_u;
  return n_u;
}

std::size_t classify_unstable(const LyapunovSpectrum& spectrum, double tol) {
  const std::size_t n_u = count_unstable(spectrum, tol);
  if (n_u == spectrum.exponents.size()) {
    throw SubspaceOverflow("all " + std::to_string(n_u) +
                           " tracked exponents are unstable; increase m so the stable/neutral block is nonempty");
  }
  return n_u;
}

void assemble_solution(const SweepResult& sweep, MarchSolution& solution) {
  const std::size_t K = sweep.K();
  double sens = 0.0, flow = 0.0;
  for (std::size_t i = 1; i <= K; ++i) {
    const auto& rec = sweep.segments[i - 1];
    sens += solution.a[i].dot(rec.d) + rec.h;
    flow += solution.a[i].dot(rec.y_flow) + rec.v_flow;
  }
  solution.sensitivity = (sens + sweep.Js_integral) / sweep.T;
  solution.J_bar = sweep.J_bar;
  solution.neutral_defect = std::abs(flow) / sweep.T;
  double max_norm = 0.0;
  for (std::size_t i = 0; i <= K; ++i) {
    max_norm = std::max(max_norm, (sweep.Q(i) * solution.a[i] + sweep.gamma(i)).norm());
  }
  solution.max_adjoint_norm = max_norm;
}

MarchSolution march_exact(const SweepResult& sweep) {
  if (!sweep.has_particular) throw ContractViolation("march_exact: sweep has no particular solution");
  const std::size_t K = sweep.K();
  const auto m = static_cast<Eigen::Index>(sweep.m);
  MarchSolution sol;
  sol.algorithm = MarchAlgorithm::exact;
  sol.n_unstable = sweep.m;
  sol.a.resize(K + 1);
  sol.a[0] = Vector::Zero(m);
  for (std::size_t i = 1; i <= K; ++i) {
    const auto& rec = sweep.segments[i - 1];
    const Vector rhs = sol.a[i - 1] + rec.b;
    sol.triangular_flops += static_cast<std::size_t>(m);
    sol.a[i] = back_substitute(rec.R, rhs, &sol.triangular_flops);
  }
  assemble_solution(sweep, sol);
  return sol;
}

MarchSolution march_split(const SweepResult& sweep, std::size_t n_unstable) {
  if (!sweep.has_particular) throw ContractViolation("march_split: sweep has no particular solution");
  if (n_unstable > sweep.m) throw ContractViolation("march_split: n_u exceeds m");
  const std::size_t K = sweep.K();
  const auto nu = static_cast<Eigen::Index>(n_unstable);
  const auto ns = static_cast<Eigen::Index>(sweep.m - n_unstable);

  // Stable/neutral block, backward from a_K^s = 0.
  std::vector<Vector> as(K + 1);
  as[K] = Vector::Zero(ns);
  for (std::size_t i = K; i >= 1; --i) {
    const auto& rec = sweep.segments[i - 1];
    as[i - 1] = rec.R.bottomRightCorner(ns, ns) * as[i] - rec.b.tail(ns);
  }

  // Unstable block, forward from a_0^u = 0.
  MarchSolution sol;
  sol.algorithm = MarchAlgorithm::split;
  sol.n_unstable = n_unstable;
  std::vector<Vector> au(K + 1);
  au[0] = Vector::Zero(nu);
  for (std::size_t i = 1; i <= K; ++i) {
    if (nu == 0) {
      au[i] = Vector::Zero(0);
      continue;
    }
    const auto& rec = sweep.segments[i - 1];
    Vector rhs = au[i - 1] + rec.b.head(nu);
    if (ns > 0) rhs -= rec.R.topRightCorner(nu, ns) * as[i];
    sol.triangular_flops += static_cast<std::size_t>(nu);
    au[i] = back_substitute(rec.R.topLeftCorner(nu, nu), rhs, &sol.triangular_flops);
  }

  sol.a.resize(K + 1);
  for (std::size_t i = 0; i <= K; ++i) {
    sol.a[i].resize(nu + ns);
    sol.a[i] << au[i], as[i];
  }
  assemble_solution(sweep, sol);
  return sol;
}

MarchSolution march_split(const SweepResult& sweep, const LyapunovSpectrum& spectrum, double tol_neutral) {
  return march_split(sweep, classify_unstable(spectrum, tol_neutral));
}

AdjointReconstruction reconstruct_adjoint(const ButcherTableau& tableau, const DynamicalSystem& system,
                                          const Objective& objective, const TrajectoryStore& trajectory,
                                          const MarchConfig& config, const SweepResult& sweep,
                                          const MarchSolution& solution,
                                          const std::vector<std::size_t>& sample_steps) {
  const std::size_t S = config.steps_per_segment();
  const std::size_t K = sweep.K();
  const std::size_t N = K * S;
  const double s = system.parameter();
  const double dt = trajectory.dt;
  const auto n = static_cast<Eigen::Index>(system.dimension());

  AdjointReconstruction out;
  out.sample_steps = sample_steps;
  std::sort(out.sample_steps.begin(), out.sample_steps.end());
  out.sample_steps.erase(std::unique(out.sample_steps.begin(), out.sample_steps.end()), out.sample_steps.end());
  if (!out.sample_steps.empty() && out.sample_steps.back() > N) {
    throw ContractViolation("reconstruct_adjoint: sample step beyond T");
  }
  out.samples = Matrix::Zero(n, static_cast<Eigen::Index>(out.sample_steps.size()));

  double flow_integral = 0.0;
  Vector psi(n), f(n);
  for (std::size_t i = K; i >= 1; --i) {
    const std::size_t hi = i * S, lo = (i - 1) * S;
    const Vector& a = solution.a[i];
    auto observer = [&](std::size_t step, const std::vector<Vector>& cols, const Vector& v) {
      psi = v;
      for (std::size_t j = 0; j < cols.size(); ++j) psi += a[static_cast<Eigen::Index>(j)] * cols[j];
      const Vector u = trajectory.state(step);
      system.rhs(u, s, f);
      const double pf = psi.dot(f);
      const double J = objective.value(u, s);
      flow_integral += simpson_weight(step - lo, S) * pf * dt / 3.0;
      out.max_norm = std::max(out.max_norm, psi.norm());
      out.max_flow_residual = std::max(out.max_flow_residual, std::abs(pf + J - sweep.J_bar));
      if (i == K && step == hi) out.terminal_flow_residual = std::abs(pf - (sweep.J_bar - J));
      if (step == lo && i > 1) {
        const Vector other = sweep.Q(i - 1) * solution.a[i - 1] + sweep.gamma(i - 1);
        const double scale = std::max(psi.norm(), 1e-300);
        out.max_continuity_mismatch = std::max(out.max_continuity_mismatch, (psi - other).norm() / scale);
      }
      if (step > lo || step == 0) {
        auto it = std::lower_bound(out.sample_steps.begin(), out.sample_steps.end(), step);
        if (it != out.sample_steps.end() && *it == step) {
          out.samples.col(static_cast<Eigen::Index>(it - out.sample_steps.begin())) = psi;
        }
      }
    };
    (void)integrate_adjoint_bundle(tableau, system, objective, trajectory, s, hi, lo, sweep.Q(i), sweep.gamma(i),
                                   observer);
  }
  out.neutral_defect = std::abs(flow_integral) / sweep.T;
  return out;
}

double conventional_adjoint_norm(const ButcherTableau& tableau, const DynamicalSystem& system,
                                 const Objective& objective, const TrajectoryStore& trajectory, std::size_t step_T) {
  if (step_T > trajectory.steps()) throw ContractViolation("conventional_adjoint_norm: step beyond trajectory");
  const double s = system.parameter();
  Vector psi = Vector::Zero(static_cast<Eigen::Index>(system.dimension()));
  for (std::size_t step = step_T; step-- > 0;) {
    StepLinearization lin(tableau, system, &objective, trajectory.state(step), s, trajectory.dt);
    lin.adjoint(psi, true);
    if (!psi.allFinite()) throw IntegrationDiverged("conventional adjoint overflowed", step);
  }
  return psi.norm();
}

}  // namespace shadow
