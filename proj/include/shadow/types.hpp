#pragma once

#include <Eigen/Dense>

namespace shadow {

/// Phase-space vector (state, adjoint, or tangent), length n.
using Vector = Eigen::VectorXd;

/// Column-major dense matrix; bundles of adjoint solutions are stored one per column.
using Matrix = Eigen::MatrixXd;

}  // namespace shadow
