#pragma once

#include <Eigen/Dense>

namespace tpmwork::linalg {

struct SymmetricEigen {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // columns
};

/// Dense real symmetric eigendecomposition (LAPACK dsyevd, divide and conquer).
/// Only the lower triangle of `a` is read. Throws NumericalError on LAPACK failure.
SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& a);

/// Pins the BLAS backend to a single thread so results do not depend on how many
/// worker threads call into it. Idempotent.
void pin_blas_threads();

}  // namespace tpmwork::linalg
