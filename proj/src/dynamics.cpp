#include "shadow/dynamics.hpp"

#include <string>

#include "shadow/errors.hpp"

namespace shadow {

BandedMatrix::BandedMatrix(std::size_t n, std::size_t lower, std::size_t upper)
    : n_(n), lower_(lower), upper_(upper), width_(lower + upper + 1), band_(n * (lower + upper + 1), 0.0) {}

double& BandedMatrix::at(std::size_t i, std::size_t j) {
  if (i >= n_ || j >= n_ || j + lower_ < i || j > i + upper_) {
    throw ContractViolation("BandedMatrix::at: (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") outside the band");
  }
  return band_[i * width_ + (j + lower_ - i)];
}

double BandedMatrix::operator()(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_ || j + lower_ < i || j > i + upper_) return 0.0;
  return band_[i * width_ + (j + lower_ - i)];
}

void BandedMatrix::apply(const Vector& x, Vector& y) const {
  y.resize(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t j_lo = i > lower_ ? i - lower_ : 0;
    const std::size_t j_hi = std::min(n_ - 1, i + upper_);
    const double* row = &band_[i * width_ + lower_ - i];
    double acc = 0.0;
    for (std::size_t j = j_lo; j <= j_hi; ++j) acc += row[j] * x[static_cast<Eigen::Index>(j)];
    y[static_cast<Eigen::Index>(i)] = acc;
  }
}

void BandedMatrix::apply_transpose(const Vector& x, Vector& y) const {
  // Gathered by output index so the summation order is fixed per entry.
  y.resize(static_cast<Eigen::Index>(n_));
  for (std::size_t j = 0; j < n_; ++j) {
    const std::size_t i_lo = j > upper_ ? j - upper_ : 0;
    const std::size_t i_hi = std::min(n_ - 1, j + lower_);
    double acc = 0.0;
    for (std::size_t i = i_lo; i <= i_hi; ++i) {
      acc += band_[i * width_ + (j + lower_ - i)] * x[static_cast<Eigen::Index>(i)];
    }
    y[static_cast<Eigen::Index>(j)] = acc;
  }
}

Matrix BandedMatrix::dense() const {
  const auto n = static_cast<Eigen::Index>(n_);
  Matrix a = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(i, j);
    }
  }
  return a;
}

void require_dimension(const DynamicalSystem& system, const Vector& v, const char* what) {
  if (static_cast<std::size_t>(v.size()) != system.dimension()) {
    throw ContractViolation(std::string(what) + ": expected length " + std::to_string(system.dimension()) +
                            ", got " + std::to_string(v.size()) + " (" + system.info().name + ")");
  }
}

Vector rhs(const DynamicalSystem& system, const Vector& u, double s) {
  require_dimension(system, u, "rhs(u)");
  Vector out(u.size());
  system.rhs(u, s, out);
  return out;
}

Vector jacobian_apply(const DynamicalSystem& system, const Vector& u, double s, const Vector& v) {
  require_dimension(system, u, "jacobian_apply(u)");
  require_dimension(system, v, "jacobian_apply(v)");
  Vector out;
  system.jacobian(u, s).apply(v, out);
  return out;
}

Vector jacobian_transpose_apply(const DynamicalSystem& system, const Vector& u, double s, const Vector& w) {
  require_dimension(system, u, "jacobian_transpose_apply(u)");
  require_dimension(system, w, "jacobian_transpose_apply(w)");
  Vector out;
  system.jacobian(u, s).apply_transpose(w, out);
  return out;
}

Vector dfds(const DynamicalSystem& system, const Vector& u, double s) {
  require_dimension(system, u, "dfds(u)");
  Vector out(u.size());
  system.dfds(u, s, out);
  return out;
}

}  // namespace shadow
