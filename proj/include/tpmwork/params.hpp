#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace tpmwork {

/// Every physical and numerical knob of the driven spin + random-matrix bath model.
/// Defaults are the published parameter values except the bath dimension, which
/// defaults to a desk-scale 500 instead of 4000.
struct ModelParams {
    std::size_t N = 500;        ///< bath dimension
    double B_z = 0.5;           ///< two-level splitting
    double beta = 1.0;          ///< bath DOS growth rate, also the JR inverse temperature
    double E_bath_min = 0.0;
    double E_bath_max = 4.5;
    double sigma_int_sq = 0.5;  ///< variance of the Gaussian bandwidth envelope f
    double xi = 1.0;            ///< stiffness control exponent in the envelope g
    double alpha = 0.4;         ///< interaction strength
    double lambda = 0.25;       ///< drive strength
    double omega_prot = 0.5;    ///< drive angular frequency
    double n_periods = 3.5;     ///< protocol length in drive periods
    std::uint64_t seed = 1;     ///< seed of the disorder R_{nl}

    std::size_t dim() const noexcept { return 2 * N; }

    /// T = n_periods * 2 pi / omega_prot.
    double duration() const noexcept { return n_periods * 2.0 * std::numbers::pi / omega_prot; }

    /// True when sin(omega_prot T) = 0 by construction (half-integer or integer period count),
    /// i.e. H(T) = H(0).
    bool is_cyclic() const noexcept;

    /// All violated invariants, human readable. Empty when valid.
    std::vector<std::string> violations() const;

    /// Throws ConfigError listing every violation.
    void validate() const;
};

}  // namespace tpmwork
