#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tpmwork/params.hpp"

namespace tpmwork {

/// Bath levels E_j, j = 1..N, strictly increasing, last level equal to E_max.
struct BathSpectrum {
    std::vector<double> energies;

    std::size_t size() const noexcept { return energies.size(); }
};

/// E_j = (1/beta) ln{ (j/N) e^{beta E_max} + (1 - j/N) e^{beta E_min} } for j = 1..N.
/// Throws std::invalid_argument for N < 2 or E_max < E_min. E_max == E_min yields a
/// fully degenerate spectrum.
BathSpectrum bath_energies(std::size_t n, double beta, double e_min, double e_max);

/// Growth rate of the density of states: weighted least-squares slope of ln(levels per
/// interval) against the interval center. Intervals of `bin_width` are laid down from the
/// top level; the incomplete lowest one and empty ones are dropped; weights are the counts.
double bath_dos_slope(const BathSpectrum& bath, double bin_width = 0.25);

/// Slope of the least-squares line through (E_j, ln j). The cumulative count of an exponential
/// DOS is C (e^{beta E} - e^{beta E_min}), so this overshoots beta unless E_min is far below.
double bath_cumulative_slope(const BathSpectrum& bath);

/// CSV with header `j,energy` (j is 1-based).
void write_bath_csv(std::ostream& out, const BathSpectrum& bath);

/// Energy envelopes of the interaction matrix elements.
struct InteractionEnvelopes {
    double beta = 1.0;
    double xi = 1.0;
    double e_max = 4.5;
    double sigma_sq = 0.5;

    /// g(E) = exp(-beta xi (E - E_max) / 4), evaluated at E = E_n + E_l.
    double g(double energy_sum) const noexcept;
    /// f(w) = exp(-w^2 / (2 sigma^2)), evaluated at w = |E_n - E_l|.
    double f(double omega) const noexcept;
};

InteractionEnvelopes interaction_envelopes(const ModelParams& params);

/// Symmetric N x N standard-normal matrix R. Entries are drawn once for n <= l in
/// row-major order (n outer, l inner) from a mt19937_64 stream.
Eigen::MatrixXd draw_disorder(std::size_t n, std::mt19937_64& rng);

/// Bath block B_{nl} = g(E_n + E_l) f(|E_n - E_l|) R_{nl} of the interaction.
Eigen::MatrixXd interaction_bath_block(const ModelParams& params, const BathSpectrum& bath,
                                       const Eigen::MatrixXd& disorder);

/// Full 2N x 2N interaction in the product basis (spin index slow, bath index fast):
/// zero on spin-diagonal blocks, the bath block on both off-diagonal blocks.
Eigen::MatrixXd build_interaction(const ModelParams& params, const BathSpectrum& bath,
                                  std::mt19937_64& rng);

/// The drive V = (|1><2| + h.c.) (x) 1_bath, never stored dense. It pairs product
/// basis index k with k + N.
struct DriveOperator {
    std::size_t bath_dim = 0;

    std::size_t partner(std::size_t k) const noexcept {
        return k < bath_dim ? k + bath_dim : k - bath_dim;
    }
    /// Returns V x for a product-basis matrix x (rows permuted).
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

/// Static Hamiltonian H(0) in the product basis plus its spectral decomposition.
/// Immutable after construction; safe to share read-only between threads.
class HamiltonianSet {
public:
    const ModelParams& params() const noexcept { return params_; }
    const BathSpectrum& bath() const noexcept { return bath_; }
    const Eigen::MatrixXd& h0() const noexcept { return h0_; }
    DriveOperator drive() const noexcept { return DriveOperator{params_.N}; }
    /// Ascending eigenvalues of H(0).
    const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
    /// Orthogonal Q, column i is eigenvector i in the product basis.
    const Eigen::MatrixXd& eigenvectors() const noexcept { return eigenvectors_; }
    /// Q^T V Q, the drive expressed in the eigenbasis of H(0). Squares to identity.
    const Eigen::MatrixXd& drive_eigenbasis() const noexcept { return drive_eigen_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(eigenvalues_.size()); }

    /// max |Q diag(eps) Q^T - H0| / max |H0|
    double reconstruction_residual() const noexcept { return reconstruction_residual_; }
    /// max |Q^T Q - 1|
    double orthonormality_residual() const noexcept { return orthonormality_residual_; }

    /// (max eps + min eps) / 2
    double spectrum_center() const noexcept;

private:
    friend HamiltonianSet assemble_hamiltonian(const ModelParams&, const BathSpectrum&,
                                               const Eigen::MatrixXd&);
    HamiltonianSet() = default;

    ModelParams params_;
    BathSpectrum bath_;
    Eigen::MatrixXd h0_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenvectors_;
    Eigen::MatrixXd drive_eigen_;
    double reconstruction_residual_ = 0.0;
    double orthonormality_residual_ = 0.0;
};

/// Tolerances of the decomposition checks performed in assemble_hamiltonian.
inline constexpr double kReconstructionTolerance = 1e-9;
inline constexpr double kOrthonormalityTolerance = 1e-10;

/// H(0) = H_sys + H_bath + alpha H_int for a given interaction matrix. Lets callers reuse
/// one disorder realization across several alpha values. Throws NumericalError carrying
/// the residual when the eigendecomposition fails its checks.
HamiltonianSet assemble_hamiltonian(const ModelParams& params, const BathSpectrum& bath,
                                    const Eigen::MatrixXd& interaction);

/// Builds the bath, draws H_int from `params.seed` and assembles H(0).
HamiltonianSet build_hamiltonian(const ModelParams& params);

}  // namespace tpmwork
