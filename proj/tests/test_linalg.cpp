#include <doctest.h>

#include <random>

#include "shadow/errors.hpp"
#include "shadow/linalg.hpp"
#include "support.hpp"

using namespace shadow;
using namespace shadow::testing;

TEST_CASE("thin QR properties for every size up to 32") {
  std::mt19937_64 rng(42);
  for (Eigen::Index n = 1; n <= 32; ++n) {
    for (Eigen::Index m = 1; m <= n; m += (n > 8 ? 3 : 1)) {
      const Matrix a = random_matrix(rng, n, m);
      const ThinQR qr = thin_qr(a);
      REQUIRE(qr.Q.rows() == n);
      REQUIRE(qr.Q.cols() == m);
      REQUIRE(qr.R.rows() == m);
      CHECK((qr.Q.transpose() * qr.Q - Matrix::Identity(m, m)).norm() <= 1e-12);
      CHECK((qr.Q * qr.R - a).norm() <= 1e-12 * a.norm());
      for (Eigen::Index j = 0; j < m; ++j) {
        CHECK(qr.R(j, j) >= 0.0);
        for (Eigen::Index i = j + 1; i < m; ++i) CHECK(qr.R(i, j) == 0.0);
      }
    }
  }
}

TEST_CASE("thin QR is deterministic and unique up to the sign convention") {
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(rng, 7, 4);
  const ThinQR q1 = thin_qr(a);
  const ThinQR q2 = thin_qr(a);
  CHECK(q1.Q == q2.Q);
  CHECK(q1.R == q2.R);
  // Flipping a column of A flips the matching column of Q and row of R.
  Matrix b = a;
  b.col(2) *= -1.0;
  const ThinQR q3 = thin_qr(b);
  CHECK((q3.Q.col(2) + q1.Q.col(2)).norm() <= 1e-13);
}

TEST_CASE("thin QR rejects rank deficiency and wide matrices") {
  Matrix a(4, 3);
  a << 1, 2, 3, 4, 5, 9, 7, 8, 15, 1, 1, 2;  // third column = first + second
  try {
    (void)thin_qr(a);
    FAIL("expected RankDeficient");
  } catch (const RankDeficient& e) {
    CHECK(e.column() == 2);
  }
  CHECK_THROWS_AS((void)thin_qr(Matrix::Zero(3, 1)), RankDeficient);
  CHECK_THROWS_AS((void)thin_qr(Matrix::Ones(2, 3)), ContractViolation);
}

TEST_CASE("back substitution hand case") {
  Matrix r(2, 2);
  r << 2, 1, 0, 1;
  Vector rhs(2);
  rhs << 5, 2;
  std::size_t flops = 0;
  const Vector x = back_substitute(r, rhs, &flops);
  CHECK(x[0] == 1.5);
  CHECK(x[1] == 2.0);
  CHECK(flops == 4);
}

TEST_CASE("back substitution residual on random well-conditioned systems") {
  std::mt19937_64 rng(8);
  for (Eigen::Index m = 1; m <= 32; ++m) {
    const Matrix r = random_upper(rng, m);
    const Vector b = random_vector(rng, m);
    const Vector x = back_substitute(r, b);
    CHECK((r * x - b).norm() <= 1e-12 * (r.norm() * x.norm() + b.norm()));
  }
}

TEST_CASE("back substitution reports the singular pivot") {
  Matrix r = Matrix::Identity(3, 3);
  r(1, 1) = 0.0;
  try {
    (void)back_substitute(r, Vector::Ones(3));
    FAIL("expected SingularSystem");
  } catch (const SingularSystem& e) {
    CHECK(e.index() == 1);
  }
  CHECK_THROWS_AS((void)back_substitute(Matrix::Identity(2, 2), Vector::Ones(3)), ContractViolation);
}

TEST_CASE("project_out leaves a vector orthogonal to Q") {
  std::mt19937_64 rng(4);
  const ThinQR qr = thin_qr(random_matrix(rng, 9, 3));
  const Vector v = random_vector(rng, 9);
  const Vector p = project_out(qr.Q, v);
  CHECK((qr.Q.transpose() * p).norm() <= 1e-14 * v.norm());
  CHECK((project_out(qr.Q, p) - p).norm() <= 1e-14 * v.norm());
}
