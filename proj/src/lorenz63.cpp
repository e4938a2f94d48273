#include "shadow/dynamics.hpp"

namespace shadow {

Lorenz63::Lorenz63(Lorenz63Params params)
    : params_(params), info_{"lorenz63", "Lorenz 63 with parameter s shifting the attractor along z"} {}

std::unique_ptr<DynamicalSystem> Lorenz63::with_parameter(double s) const {
  auto p = params_;
  p.s = s;
  return std::make_unique<Lorenz63>(p);
}

void Lorenz63::rhs(const Vector& u, double s, Vector& out) const {
  const double x = u[0], y = u[1], z = u[2] - s;
  out.resize(3);
  out[0] = params_.sigma * (y - x);
  out[1] = x * (params_.rho - z) - y;
  out[2] = x * y - params_.beta * z;
}

BandedMatrix Lorenz63::jacobian(const Vector& u, double s) const {
  const double x = u[0], y = u[1], z = u[2] - s;
  BandedMatrix a(3, 2, 2);
  a.at(0, 0) = -params_.sigma;
  a.at(0, 1) = params_.sigma;
  a.at(0, 2) = 0.0;
  a.at(1, 0) = params_.rho - z;
  a.at(1, 1) = -1.0;
  a.at(1, 2) = -x;
  a.at(2, 0) = y;
  a.at(2, 1) = x;
  a.at(2, 2) = -params_.beta;
  return a;
}

void Lorenz63::dfds(const Vector& u, double /*s*/, Vector& out) const {
  out.resize(3);
  out[0] = 0.0;
  out[1] = u[0];
  out[2] = params_.beta;
}

Vector Lorenz63::sample_initial_state(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> xy(-10.0, 10.0);
  std::uniform_real_distribution<double> z(10.0, 40.0);
  Vector u(3);
  u[0] = xy(rng);
  u[1] = xy(rng);
  u[2] = z(rng) + params_.s;
  return u;
}

Objective lorenz_objective() {
  Objective j;
  j.name = "z";
  j.value = [](const Vector& u, double) { return u[2]; };
  j.gradient = [](const Vector& u, double, Vector& g) {
    g.setZero(u.size());
    g[2] = 1.0;
  };
  j.parameter_derivative = [](const Vector&, double) { return 0.0; };
  return j;
}

}  // namespace shadow
