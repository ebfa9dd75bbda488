#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tpmwork/model.hpp"

namespace tpmwork {

/// Time-stepping scheme. Both are symmetric compositions of the same Strang step
/// exp(-i H0 h/2) exp(-i theta V) exp(-i H0 h/2); suzuki4 chains five of them with
/// Suzuki's fractal weights for fourth order at five drive applications per step.
enum class Scheme { strang2, suzuki4 };

struct PropagatorConfig {
    Scheme scheme = Scheme::suzuki4;
    std::size_t steps_per_period = 128;
    /// Also run with dt/2 and require the two results to agree to `tolerance`.
    bool richardson_check = true;
    /// Max 2-norm difference between the dt and dt/2 final states.
    double tolerance = 1e-6;

    std::vector<std::string> violations() const;
    void validate() const;
};

/// U|i> for a list of initial eigenstates, in eigenbasis coordinates of H(0).
struct PropagatedSet {
    std::vector<std::size_t> initial_indices;  ///< 0-based eigenstate indices
    Eigen::MatrixXcd final_states;             ///< column j is U|initial_indices[j]>
    double dt_used = 0.0;
    std::size_t steps = 0;
    /// Largest column 2-norm difference between the two finest step sizes; 0 when the
    /// evolution is exact (lambda = 0) and NaN when the check was disabled.
    double discrepancy = 0.0;
};

enum class Direction { forward, adjoint };

/// Number of Strang steps over [0, T] for a given resolution.
std::size_t step_count(const ModelParams& params, std::size_t steps_per_period);

/// Evolves each column of `states` (eigenbasis coordinates) over [0, T] with `steps`
/// steps of `scheme`. Direction::adjoint applies U^dagger exactly: substeps in reverse
/// order with conjugated phases and negated drive angles.
///
/// A Strang substep of length h is exp(-i H0 h/2) exp(-i theta V) exp(-i H0 h/2) with
/// theta = lambda sin(omega t_mid) h. In the eigenbasis the outer factors are phases
/// and, since V^2 = 1, the middle factor is cos(theta) - i sin(theta) Q^T V Q.
Eigen::MatrixXcd evolve(const HamiltonianSet& hs, const Eigen::MatrixXcd& states, std::size_t steps,
                        Scheme scheme = Scheme::suzuki4, Direction direction = Direction::forward);

/// Same as above with a separate drive strength per column, so that several protocols
/// sharing H(0) advance through one matrix product per substep.
Eigen::MatrixXcd evolve(const HamiltonianSet& hs, const Eigen::MatrixXcd& states, std::size_t steps,
                        Scheme scheme, Direction direction, std::span<const double> column_lambdas);

/// Substep weights (fractions of dt) of one step of `scheme`; palindromic, summing to 1.
std::vector<double> substep_weights(Scheme scheme);

/// Propagates the listed eigenstates, halving dt once more when the dt / dt/2 check
/// exceeds the tolerance. Throws NonconvergenceError if it still does, NumericalError if
/// a final state is not normalized to 1e-9.
PropagatedSet propagate(const HamiltonianSet& hs, const PropagatorConfig& config,
                        std::span<const std::size_t> initial_indices);

/// propagate() for several drive strengths at once (one PropagatedSet per entry of
/// `lambdas`, in order); `hs.params().lambda` is ignored.
std::vector<PropagatedSet> propagate_batch(const HamiltonianSet& hs, const PropagatorConfig& config,
                                           std::span<const std::size_t> initial_indices,
                                           std::span<const double> lambdas);

}  // namespace tpmwork
