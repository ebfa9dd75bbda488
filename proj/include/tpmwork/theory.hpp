#pragma once

// Simulation-free checks of the analytic chain: stiff kernels plus an exponential density
// of states imply <e^{-beta W}> = Z_fin / Z_ini for microcanonical initial states.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tpmwork/model.hpp"
#include "tpmwork/workstats.hpp"

namespace tpmwork::theory {

/// Stiff kernel p(F - I) on an exponential density of states Omega_n = delta Z e^{beta n delta}.
struct SyntheticEnsemble {
    double beta = 1.0;
    double delta = 0.06;
    double z_ini = 1.0;
    double z_fin = 1.0;
    std::size_t bin_count = 201;     ///< bins n = 0 .. bin_count - 1
    long kernel_min_shift = 0;       ///< kernel[k] is p(kernel_min_shift + k)
    std::vector<double> kernel;
    bool round_omega = false;        ///< integer-rounded Omega_n instead of real-valued

    long kernel_max_shift() const noexcept {
        return kernel_min_shift + static_cast<long>(kernel.size()) - 1;
    }
    /// Omega_n of the initial (final) density of states.
    double omega_ini(long n) const;
    double omega_fin(long n) const;
    /// sum_D p(D) e^{-beta delta D}; equals z_fin / z_ini for a consistent kernel.
    double kernel_moment() const;
    /// Kernel normalized and consistent with sum_I Omega_I p(F - I) = Omega_F to 1e-12.
    bool is_consistent() const;
};

/// Normalized nonnegative kernel on [-half_width, half_width] satisfying the aggregate
/// double stochasticity for the given ensemble parameters. A random base kernel is mixed
/// with a point mass at one support edge; the mixing weight solves a linear equation.
/// Throws std::invalid_argument if z_fin / z_ini is not reachable with that support.
SyntheticEnsemble make_consistent_ensemble(double beta, double delta, double z_ini, double z_fin,
                                           std::size_t bin_count, long half_width, std::mt19937_64& rng);

struct Jr0Result {
    double lhs = 0.0;          ///< sum_F p(F - I) e^{-beta (E_F - E_I)} at an interior bin I
    double rhs = 0.0;          ///< Z_fin / Z_ini
    double rhs_via_dos = 0.0;  ///< (Z_fin / Z_ini) sum_I Omega_I p(F' - I) / Omega_F'
    double max_aggregate_residual = 0.0;  ///< max_F |sum_I Omega_I p(F - I) - Omega_F| / Omega_F
    bool consistent = false;
};

/// Evaluates both sides of the stiff-kernel Jarzynski relation. Throws
/// std::invalid_argument when the kernel support does not fit inside the bin range.
Jr0Result jr0_check(const SyntheticEnsemble& ensemble);

struct FreeEnergy {
    double free_energy = 0.0;  ///< F = -ln(Z) / beta
    double entropy = 0.0;      ///< S(U) = ln(Z) + beta U
    double identity_residual = 0.0;  ///< F - (U - S / beta)
    double entropy_slope = 0.0;      ///< forward difference (S(U + h) - S(U)) / h
};

/// Throws std::invalid_argument unless z > 0 and beta > 0.
FreeEnergy free_energy_identities(double z, double beta, double energy, double h = 1e-3);

/// Residuals of sum_i p_{F<-i} = Omega_F and sum_I Omega_I p_{F<-I} = Omega_F.
struct AggregateResiduals {
    bool complete = false;  ///< table covers every eigenstate
    long first_bin = 0;
    std::vector<double> per_state;  ///< sum_i p_{F<-i} - Omega_F, per final bin
    std::vector<double> per_bin;    ///< sum_I Omega_I p_{F<-I} - Omega_F, per final bin
    std::vector<long> checkable_initial_bins;  ///< initial bins whose members are all listed

    double max_abs() const;
};

/// For a partial table the residual vectors stay empty and `checkable_initial_bins` lists
/// the initial bins whose work PDFs are exact.
AggregateResiduals doubly_stochastic_aggregate(const TransitionTable& tt, const EnergyBinning& binning,
                                               const HamiltonianSet& hs);

}  // namespace tpmwork::theory
