#include "shadow/linalg.hpp"

#include <cmath>
#include <string>

#include "shadow/errors.hpp"

namespace shadow {

ThinQR thin_qr(const Matrix& a) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = a.cols();
  if (m > n) {
    throw ContractViolation("thin_qr: more columns (" + std::to_string(m) + ") than rows (" + std::to_string(n) +
                            ")");
  }
  const double scale = m > 0 ? a.colwise().norm().maxCoeff() : 0.0;
  if (m > 0 && !(scale > 0.0)) throw RankDeficient(0);

  Eigen::HouseholderQR<Matrix> qr(a);
  ThinQR out;
  out.R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  out.Q = qr.householderQ() * Matrix::Identity(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!(std::abs(out.R(j, j)) > kRankTolerance * scale)) throw RankDeficient(static_cast<std::size_t>(j));
    if (out.R(j, j) < 0.0) {
      out.R.row(j) *= -1.0;
      out.Q.col(j) *= -1.0;
    }
  }
  return out;
}

Vector back_substitute(const Matrix& r, const Vector& rhs, std::size_t* flops) {
  const Eigen::Index m = r.rows();
  if (r.cols() != m || rhs.size() != m) throw ContractViolation("back_substitute: dimension mismatch");
  const double tol = kSingularTolerance * (m > 0 ? r.cwiseAbs().maxCoeff() : 0.0);
  Vector x(m);
  for (Eigen::Index j = m - 1; j >= 0; --j) {
    if (!(std::abs(r(j, j)) > tol)) throw SingularSystem(static_cast<std::size_t>(j));
    double acc = rhs[j];
    for (Eigen::Index k = j + 1; k < m; ++k) acc -= r(j, k) * x[k];
    x[j] = acc / r(j, j);
  }
  if (flops) *flops += static_cast<std::size_t>(m * m);
  return x;
}

Vector project_out(const Matrix& q, const Vector& v) {
  if (q.rows() != v.size()) throw ContractViolation("project_out: dimension mismatch");
  return v - q * (q.transpose() * v);
}

}  // namespace shadow
