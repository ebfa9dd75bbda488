#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tpmwork/model.hpp"
#include "tpmwork/propagator.hpp"

namespace tpmwork {

/// Energy intervals [n delta, (n+1) delta), anchored at zero.
struct EnergyBinning {
    double delta = 0.06;

    long index(double energy) const noexcept { return static_cast<long>(std::floor(energy / delta)); }
    /// Representative energy n delta of bin n.
    double energy(long bin) const noexcept { return static_cast<double>(bin) * delta; }

    void validate() const;
};

/// Eigenstates of H(0) whose eigenvalue falls into the bin of `energy` (ascending).
std::vector<std::size_t> window_members(const HamiltonianSet& hs, const EnergyBinning& binning,
                                        double energy);

/// Mean level spacing of H(0) over [energy - width/2, energy + width/2].
double mean_level_spacing(const HamiltonianSet& hs, double energy, double width);

/// A warning when delta is less than five mean level spacings around `energy`.
std::optional<std::string> binning_warning(const HamiltonianSet& hs, const EnergyBinning& binning,
                                           double energy);

/// p_{f<-i} = |<f|U|i>|^2 for every final eigenstate f and each listed i.
struct TransitionTable {
    std::vector<std::size_t> initial_indices;
    Eigen::MatrixXd probabilities;  ///< dim x initial_indices.size()

    /// max_i |sum_f p_{f<-i} - 1|
    double max_column_defect() const;
};

/// Throws std::invalid_argument if the propagated states do not match hs.
TransitionTable transition_table(const PropagatedSet& pset, const HamiltonianSet& hs);

/// Coarse-grained transition probabilities p_{F<-I} out of one initial bin.
struct WorkPdf {
    long initial_bin = 0;
    long first_final_bin = 0;
    double delta = 0.06;
    std::vector<double> probabilities;  ///< p_{F<-I}, F = first_final_bin + k

    std::size_t size() const noexcept { return probabilities.size(); }
    long final_bin(std::size_t k) const noexcept { return first_final_bin + static_cast<long>(k); }
    /// W = (F - I) delta
    double work(std::size_t k) const noexcept {
        return static_cast<double>(final_bin(k) - initial_bin) * delta;
    }
    /// P_E(W) = p_{F<-I} / delta
    double density(std::size_t k) const noexcept { return probabilities[k] / delta; }
    /// delta * sum_W P_E(W)
    double normalization() const;
};

/// CSV with header `I,F,W,P` (P is the density P_E(W)).
void write_work_pdf_csv(std::ostream& out, const WorkPdf& pdf);

/// Both granularities of coarse graining for the listed initial states.
struct CoarseGrained {
    EnergyBinning binning;
    long first_bin = 0;                       ///< lowest occupied bin of the spectrum
    std::vector<std::size_t> omega;           ///< Omega_n for bins first_bin, first_bin + 1, ...
    std::vector<std::size_t> initial_indices;
    std::vector<long> initial_bins;           ///< bin of each listed initial state
    Eigen::MatrixXd per_state;                ///< p_{F<-i}: rows are bins, columns listed states
    std::vector<WorkPdf> pdfs;                ///< one per initial bin whose members are all listed

    std::size_t bin_count() const noexcept { return omega.size(); }
    std::size_t omega_of(long bin) const noexcept;
    const WorkPdf* pdf_for(long initial_bin) const noexcept;
};

/// Throws std::invalid_argument when no initial bin is completely covered by the table.
CoarseGrained coarse_grain(const TransitionTable& tt, const EnergyBinning& binning,
                           const HamiltonianSet& hs);

enum class DeviationKind { microcanonical, eigenstate };
enum class DeviationForm { operator_exact, binned };
/// Energy subtracted from the final energy in exp(-beta (eps_f - E_ref)): the window energy
/// E0 shared by all members, or the eigenvalue of each initial state.
enum class ReferenceEnergy { window, per_state };

std::string to_string(DeviationKind kind);
std::string to_string(DeviationForm form);

/// One Jarzynski deviation with the inputs that produced it. The protocol is cyclic, so
/// the reference e^{-beta dF} is 1.
struct DeviationRecord {
    DeviationKind kind = DeviationKind::microcanonical;
    DeviationForm form = DeviationForm::operator_exact;
    ModelParams params;
    std::uint64_t seed = 0;
    double energy = 0.0;                     ///< E0 of the window, or eps_i
    std::optional<std::size_t> eigen_index;  ///< set for eigenstate records
    std::size_t omega = 1;                   ///< number of initial eigenstates averaged
    double value = 0.0;
    double dt_discrepancy = 0.0;
};

struct MicrocanonicalDeviation {
    DeviationRecord exact;
    DeviationRecord binned;
    std::vector<std::size_t> members;
};

using PropagateFn = std::function<PropagatedSet(std::span<const std::size_t>)>;

/// Binds propagate() to a Hamiltonian and configuration.
PropagateFn make_propagate_fn(const HamiltonianSet& hs, const PropagatorConfig& config);

/// D_mc from a table that covers every member of the window of e0.
///   exact:  (1/Omega) sum_{i in window} sum_f p_{f<-i} e^{-beta (eps_f - E_ref)} - 1
///   binned: sum_F p_{F<-I0} e^{-beta (F - I0) delta} - 1
MicrocanonicalDeviation microcanonical_from_table(const HamiltonianSet& hs, double e0,
                                                  const EnergyBinning& binning,
                                                  const TransitionTable& tt, double dt_discrepancy,
                                                  ReferenceEnergy reference = ReferenceEnergy::window);

/// Propagates the window of e0 and evaluates D_mc. Throws std::invalid_argument on an
/// empty window.
MicrocanonicalDeviation d_microcanonical(const HamiltonianSet& hs, double e0,
                                         const EnergyBinning& binning, const PropagateFn& propagate,
                                         ReferenceEnergy reference = ReferenceEnergy::window);

/// D_es = sum_f p_{f<-i} e^{-beta (eps_f - E_ref)} - 1 for every column of the table, with
/// E_ref = eps_i, or `shared_energy` under ReferenceEnergy::window.
std::vector<DeviationRecord> eigenstate_deviations(const HamiltonianSet& hs, const TransitionTable& tt,
                                                   double dt_discrepancy,
                                                   ReferenceEnergy reference = ReferenceEnergy::per_state,
                                                   double shared_energy = 0.0);

DeviationRecord d_eigenstate(const HamiltonianSet& hs, std::size_t index, const PropagateFn& propagate,
                             ReferenceEnergy reference = ReferenceEnergy::per_state,
                             double shared_energy = 0.0);

/// Probability density of zero work, P_E(0) = p_{I<-I} / delta.
struct StiffnessPoint {
    double energy = 0.0;  ///< requested window energy, or eps_i for the per-state variant
    long bin = 0;
    std::size_t omega = 0;
    std::optional<std::size_t> eigen_index;
    double p0 = 0.0;
};

struct StiffnessProfile {
    std::vector<StiffnessPoint> windows;
    std::vector<StiffnessPoint> eigenstates;
};

/// Profile from a table covering every member of each requested window.
StiffnessProfile stiffness_from_table(const HamiltonianSet& hs, const EnergyBinning& binning,
                                      std::span<const double> energies, const TransitionTable& tt);

/// Propagates all members of the requested windows at once. Throws on an empty window.
StiffnessProfile stiffness_profile(const HamiltonianSet& hs, const EnergyBinning& binning,
                                   std::span<const double> energies, const PropagateFn& propagate);

/// Spread of p_{F<-i} across the listed members i of an initial bin.
struct SmoothnessCell {
    long initial_bin = 0;
    long final_bin = 0;
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;  ///< sample standard deviation: the smoothness defect
};

/// Cells for every initial bin with at least two listed states and every final bin.
/// Throws std::invalid_argument when no bin has two listed states.
std::vector<SmoothnessCell> smoothness_profile(const TransitionTable& tt, const EnergyBinning& binning,
                                               const HamiltonianSet& hs);

/// Mean smoothness defect over cells with a nonzero mean.
double mean_smoothness_defect(std::span<const SmoothnessCell> cells);

using WorkFunction = std::function<double(double)>;

/// <h(W)> = sum_i w_i sum_f p_{f<-i} h(eps_f - eps_i); one weight per table column.
/// Throws std::invalid_argument unless the weights are nonnegative and sum to 1.
double average_over_work(const TransitionTable& tt, const HamiltonianSet& hs, const WorkFunction& h,
                         std::span<const double> weights);

struct BinWeight {
    long bin = 0;
    double weight = 0.0;
};

/// <h(W)> = sum_I w_I sum_F p_{F<-I} h((F - I) delta); every weighted bin needs a WorkPdf.
double average_over_work(const CoarseGrained& cg, const WorkFunction& h,
                         std::span<const BinWeight> weights);

}  // namespace tpmwork
