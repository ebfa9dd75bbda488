#include "tpmwork/linalg.hpp"

#include <lapacke.h>

#include <string>

#include "tpmwork/errors.hpp"

extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace tpmwork::linalg {

SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) {
        throw NumericalError("symmetric_eigen: matrix is not square", 0.0);
    }
    pin_blas_threads();
    SymmetricEigen out;
    out.vectors = a;  // overwritten with eigenvectors (column-major, as LAPACK expects)
    out.values.resize(a.rows());
    const auto n = static_cast<lapack_int>(a.rows());
    if (n == 0) {
        return out;
    }
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.vectors.data(), n,
                                           out.values.data());
    if (info != 0) {
        throw NumericalError("dsyevd failed with info = " + std::to_string(info),
                             static_cast<double>(info));
    }
    return out;
}

void pin_blas_threads() {
    if (openblas_set_num_threads != nullptr) {
        openblas_set_num_threads(1);
    }
}

}  // namespace tpmwork::linalg
