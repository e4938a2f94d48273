#pragma once

#include <cstddef>

#include "shadow/types.hpp"

namespace shadow {

/// A = Q R with Q (n x m) orthonormal and R (m x m) upper triangular, diag(R) >= 0.
struct ThinQR {
  Matrix Q;
  Matrix R;
};

/// Relative tolerances used by the kernels below.
inline constexpr double kRankTolerance = 1e-10;      // times the largest column norm of A
inline constexpr double kSingularTolerance = 1e-14;  // times max |R_ij|

/**
 * Householder QR restricted to the first m columns of Q.
 *
 * Column signs are flipped so every diagonal entry of R is nonnegative; this makes
 * the factorization unique and the segment bookkeeping reproducible. Throws
 * RankDeficient naming the first column whose |R_jj| falls below the rank tolerance,
 * and ContractViolation when m > n.
 */
[[nodiscard]] ThinQR thin_qr(const Matrix& a);

/// Solves R x = rhs for upper-triangular R. `flops`, when given, is incremented by m^2.
[[nodiscard]] Vector back_substitute(const Matrix& r, const Vector& rhs, std::size_t* flops = nullptr);

/// (I - Q Q^T) v
[[nodiscard]] Vector project_out(const Matrix& q, const Vector& v);

}  // namespace shadow
