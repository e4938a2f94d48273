#include <cmath>
#include <string>

#include "shadow/dynamics.hpp"
#include "shadow/errors.hpp"

namespace shadow {

KSAdvection parse_ks_advection(const std::string& name) {
  if (name == "advective") return KSAdvection::advective;
  if (name == "conservative") return KSAdvection::conservative;
  if (name == "skew") return KSAdvection::skew;
  throw ContractViolation("unknown KS advection form '" + name + "' (expected advective, conservative or skew)");
}

std::string to_string(KSAdvection form) {
  switch (form) {
    case KSAdvection::advective:
      return "advective";
    case KSAdvection::conservative:
      return "conservative";
    case KSAdvection::skew:
      return "skew";
  }
  return "?";
}

std::size_t KSGrid::interior_nodes() const {
  if (!(length > 0.0) || !(dx > 0.0)) throw ContractViolation("KSGrid: length and dx must be positive");
  const double cells = length / dx;
  const double rounded = std::round(cells);
  if (std::abs(cells - rounded) > 1e-9 * cells || rounded < 4.0) {
    throw ContractViolation("KSGrid: L/dx must be an integer >= 4, got " + std::to_string(cells));
  }
  return static_cast<std::size_t>(rounded) - 1;
}

KuramotoSivashinsky::KuramotoSivashinsky(KSGrid grid)
    : grid_(grid),
      n_(grid.interior_nodes()),
      info_{"ks", "Kuramoto-Sivashinsky, L=" + std::to_string(grid.length) + ", dx=" + std::to_string(grid.dx) + ", " + to_string(grid.advection)} {}

std::unique_ptr<DynamicalSystem> KuramotoSivashinsky::with_parameter(double s) const {
  auto g = grid_;
  g.s = s;
  return std::make_unique<KuramotoSivashinsky>(g);
}

namespace {

struct AdvectionWeights {
  double alpha, beta;
};

AdvectionWeights weights(KSAdvection form) {
  switch (form) {
    case KSAdvection::advective:
      return {1.0, 0.0};
    case KSAdvection::conservative:
      return {0.0, 0.5};
    case KSAdvection::skew:
      break;
  }
  return {1.0 / 3.0, 1.0 / 3.0};
}

// Node values with ghost layers: p[k] holds u_{k-1}, so p[1] and p[n+2] are the walls.
void pad(const Vector& u, std::vector<double>& p) {
  const auto n = static_cast<std::size_t>(u.size());
  p.assign(n + 4, 0.0);
  for (std::size_t i = 0; i < n; ++i) p[i + 2] = u[static_cast<Eigen::Index>(i)];
  p[0] = u[0];
  p[n + 3] = u[static_cast<Eigen::Index>(n - 1)];
}

}  // namespace

void KuramotoSivashinsky::rhs(const Vector& u, double s, Vector& out) const {
  thread_local std::vector<double> p;
  pad(u, p);
  const double h = grid_.dx;
  const double c1 = 1.0 / (2.0 * h), c2 = 1.0 / (h * h), c4 = 1.0 / (h * h * h * h);
  const auto [alpha, beta] = weights(grid_.advection);
  out.resize(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t k = i + 2;
    const double ux = (p[k + 1] - p[k - 1]) * c1;
    const double uxx = (p[k + 1] - 2.0 * p[k] + p[k - 1]) * c2;
    const double uxxxx = (p[k + 2] - 4.0 * p[k + 1] + 6.0 * p[k] - 4.0 * p[k - 1] + p[k - 2]) * c4;
    const double w = alpha * p[k] + beta * (p[k + 1] + p[k - 1]);
    out[static_cast<Eigen::Index>(i)] = -(w + s) * ux - uxx - uxxxx;
  }
}

BandedMatrix KuramotoSivashinsky::jacobian(const Vector& u, double s) const {
  const double h = grid_.dx;
  const double c1 = 1.0 / (2.0 * h), c2 = 1.0 / (h * h), c4 = 1.0 / (h * h * h * h);
  const auto [alpha, beta] = weights(grid_.advection);
  // Linear part -D2 - D4, offsets -2..2.
  const double lin[5] = {-c4, -c2 + 4.0 * c4, 2.0 * c2 - 6.0 * c4, -c2 + 4.0 * c4, -c4};
  const auto n = static_cast<long>(n_);
  BandedMatrix a(n_, 2, 2);
  auto node = [&](long j) -> double { return (j >= 1 && j <= n) ? u[j - 1] : 0.0; };
  for (long i = 1; i <= n; ++i) {
    for (long o = -2; o <= 2; ++o) {
      long j = i + o;
      if (j == -1) j = 1;           // ghost mirrors u_1
      if (j == n + 2) j = n;        // ghost mirrors u_n
      if (j < 1 || j > n) continue;  // wall nodes are pinned to zero
      a.at(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)) += lin[o + 2];
    }
    const double d = (node(i + 1) - node(i - 1)) * c1;
    const double adv = alpha * node(i) + beta * (node(i + 1) + node(i - 1)) + s;
    const auto r = static_cast<std::size_t>(i - 1);
    a.at(r, r) += -alpha * d;
    if (i + 1 <= n) a.at(r, r + 1) += -beta * d - adv * c1;
    if (i - 1 >= 1) a.at(r, r - 1) += -beta * d + adv * c1;
  }
  return a;
}

void KuramotoSivashinsky::dfds(const Vector& u, double /*s*/, Vector& out) const {
  const double c1 = 1.0 / (2.0 * grid_.dx);
  const auto n = static_cast<Eigen::Index>(n_);
  out.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double right = i + 1 < n ? u[i + 1] : 0.0;
    const double left = i > 0 ? u[i - 1] : 0.0;
    out[i] = -(right - left) * c1;
  }
}

Vector KuramotoSivashinsky::sample_initial_state(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  Vector u(static_cast<Eigen::Index>(n_));
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = dist(rng);
  return u;
}

Objective ks_objective(const KSGrid& grid) {
  const double weight = grid.dx / grid.length;
  Objective j;
  j.name = "spatial_mean";
  j.value = [weight](const Vector& u, double) { return weight * u.sum(); };
  j.gradient = [weight](const Vector& u, double, Vector& g) { g.setConstant(u.size(), weight); };
  j.parameter_derivative = [](const Vector&, double) { return 0.0; };
  return j;
}

}  // namespace shadow
