#include "tpmwork/workstats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tpmwork/errors.hpp"

namespace tpmwork {

void EnergyBinning::validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        throw ConfigError("invalid binning:\n  - delta must be > 0", {"delta must be > 0"});
    }
}

std::vector<std::size_t> window_members(const HamiltonianSet& hs, const EnergyBinning& binning,
                                        double energy) {
    const long bin = binning.index(energy);
    const auto& eps = hs.eigenvalues();
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < eps.size(); ++i) {
        if (binning.index(eps(i)) == bin) out.push_back(static_cast<std::size_t>(i));
    }
    return out;
}

double mean_level_spacing(const HamiltonianSet& hs, double energy, double width) {
    const auto& eps = hs.eigenvalues();
    const auto count = (eps.array() >= energy - 0.5 * width && eps.array() < energy + 0.5 * width).count();
    if (count == 0) return std::numeric_limits<double>::infinity();
    return width / static_cast<double>(count);
}

std::optional<std::string> binning_warning(const HamiltonianSet& hs, const EnergyBinning& binning,
                                           double energy) {
    const double spacing = mean_level_spacing(hs, energy, 10.0 * binning.delta);
    if (binning.delta >= 5.0 * spacing) return std::nullopt;
    std::ostringstream msg;
    msg << "bin width " << binning.delta << " is less than 5 mean level spacings (" << spacing
        << ") near E = " << energy;
    return msg.str();
}

double TransitionTable::max_column_defect() const {
    if (probabilities.cols() == 0) return 0.0;
    return (probabilities.colwise().sum().array() - 1.0).abs().maxCoeff();
}

TransitionTable transition_table(const PropagatedSet& pset, const HamiltonianSet& hs) {
    if (pset.final_states.rows() != static_cast<Eigen::Index>(hs.dim())) {
        throw std::invalid_argument("transition_table: propagated states have dimension " +
                                    std::to_string(pset.final_states.rows()) + ", Hamiltonian has " +
                                    std::to_string(hs.dim()));
    }
    if (pset.final_states.cols() != static_cast<Eigen::Index>(pset.initial_indices.size())) {
        throw std::invalid_argument("transition_table: column count does not match initial indices");
    }
    TransitionTable tt;
    tt.initial_indices = pset.initial_indices;
    tt.probabilities = pset.final_states.cwiseAbs2();
    return tt;
}

double WorkPdf::normalization() const {
    return std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
}

void write_work_pdf_csv(std::ostream& out, const WorkPdf& pdf) {
    out << "I,F,W,P\n";
    char w[64], p[64];
    for (std::size_t k = 0; k < pdf.size(); ++k) {
        std::snprintf(w, sizeof w, "%.17g", pdf.work(k));
        std::snprintf(p, sizeof p, "%.17g", pdf.density(k));
        out << pdf.initial_bin << ',' << pdf.final_bin(k) << ',' << w << ',' << p << '\n';
    }
}

std::size_t CoarseGrained::omega_of(long bin) const noexcept {
    const long k = bin - first_bin;
    if (k < 0 || k >= static_cast<long>(omega.size())) return 0;
    return omega[static_cast<std::size_t>(k)];
}

const WorkPdf* CoarseGrained::pdf_for(long initial_bin) const noexcept {
    for (const auto& pdf : pdfs) {
        if (pdf.initial_bin == initial_bin) return &pdf;
    }
    return nullptr;
}

namespace {

// Column of each eigenstate index in the table, -1 if not listed.
std::vector<long> column_lookup(const TransitionTable& tt, std::size_t dim) {
    std::vector<long> col(dim, -1);
    for (std::size_t j = 0; j < tt.initial_indices.size(); ++j) {
        const auto i = tt.initial_indices[j];
        if (i >= dim) throw std::invalid_argument("transition table index outside the spectrum");
        col[i] = static_cast<long>(j);
    }
    return col;
}

void check_table(const TransitionTable& tt, const HamiltonianSet& hs) {
    if (tt.probabilities.rows() != static_cast<Eigen::Index>(hs.dim())) {
        throw std::invalid_argument("transition table does not match the Hamiltonian dimension");
    }
}

std::vector<long> require_members(const std::vector<long>& lookup, std::span<const std::size_t> members,
                                  double energy) {
    if (members.empty()) {
        std::ostringstream msg;
        msg << "empty energy window at E = " << energy;
        throw std::invalid_argument(msg.str());
    }
    std::vector<long> cols;
    cols.reserve(members.size());
    for (const auto i : members) {
        if (lookup[i] < 0) {
            std::ostringstream msg;
            msg << "eigenstate " << i << " of the window at E = " << energy << " was not propagated";
            throw std::invalid_argument(msg.str());
        }
        cols.push_back(lookup[i]);
    }
    return cols;
}

}  // namespace

CoarseGrained coarse_grain(const TransitionTable& tt, const EnergyBinning& binning,
                           const HamiltonianSet& hs) {
    binning.validate();
    check_table(tt, hs);
    const auto& eps = hs.eigenvalues();
    const auto dim = static_cast<Eigen::Index>(hs.dim());

    CoarseGrained cg;
    cg.binning = binning;
    cg.first_bin = binning.index(eps(0));
    const long last_bin = binning.index(eps(dim - 1));
    const auto nbins = static_cast<std::size_t>(last_bin - cg.first_bin + 1);
    cg.omega.assign(nbins, 0);
    std::vector<std::size_t> row_of(static_cast<std::size_t>(dim));
    for (Eigen::Index f = 0; f < dim; ++f) {
        row_of[static_cast<std::size_t>(f)] = static_cast<std::size_t>(binning.index(eps(f)) - cg.first_bin);
        ++cg.omega[row_of[static_cast<std::size_t>(f)]];
    }

    const auto k = static_cast<Eigen::Index>(tt.initial_indices.size());
    cg.initial_indices = tt.initial_indices;
    cg.per_state = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nbins), k);
    for (Eigen::Index j = 0; j < k; ++j) {
        for (Eigen::Index f = 0; f < dim; ++f) {
            cg.per_state(static_cast<Eigen::Index>(row_of[static_cast<std::size_t>(f)]), j) +=
                tt.probabilities(f, j);
        }
        cg.initial_bins.push_back(binning.index(eps(static_cast<Eigen::Index>(tt.initial_indices[static_cast<std::size_t>(j)]))));
    }

    std::map<long, std::vector<Eigen::Index>> by_bin;
    for (Eigen::Index j = 0; j < k; ++j) by_bin[cg.initial_bins[static_cast<std::size_t>(j)]].push_back(j);
    for (const auto& [bin, cols] : by_bin) {
        if (cols.size() != cg.omega_of(bin)) continue;  // bin only partially propagated
        WorkPdf pdf;
        pdf.initial_bin = bin;
        pdf.first_final_bin = cg.first_bin;
        pdf.delta = binning.delta;
        pdf.probabilities.assign(nbins, 0.0);
        for (const auto j : cols) {
            for (std::size_t r = 0; r < nbins; ++r) {
                pdf.probabilities[r] += cg.per_state(static_cast<Eigen::Index>(r), j);
            }
        }
        for (auto& p : pdf.probabilities) p /= static_cast<double>(cols.size());
        cg.pdfs.push_back(std::move(pdf));
    }
    if (cg.pdfs.empty()) {
        throw std::invalid_argument("coarse_grain: no initial energy bin has all of its eigenstates propagated");
    }
    return cg;
}

std::string to_string(DeviationKind kind) {
    return kind == DeviationKind::microcanonical ? "microcanonical" : "eigenstate";
}

std::string to_string(DeviationForm form) {
    return form == DeviationForm::operator_exact ? "exact" : "binned";
}

PropagateFn make_propagate_fn(const HamiltonianSet& hs, const PropagatorConfig& config) {
    return [&hs, config](std::span<const std::size_t> indices) { return propagate(hs, config, indices); };
}

MicrocanonicalDeviation microcanonical_from_table(const HamiltonianSet& hs, double e0,
                                                  const EnergyBinning& binning,
                                                  const TransitionTable& tt, double dt_discrepancy,
                                                  ReferenceEnergy reference) {
    binning.validate();
    check_table(tt, hs);
    const auto& p = hs.params();
    const auto& eps = hs.eigenvalues();
    const auto members = window_members(hs, binning, e0);
    const auto cols = require_members(column_lookup(tt, hs.dim()), members, e0);
    const long i0 = binning.index(e0);
    const auto dim = static_cast<Eigen::Index>(hs.dim());

    double exact = 0.0;
    double binned = 0.0;
    for (std::size_t m = 0; m < members.size(); ++m) {
        const double e_ref = reference == ReferenceEnergy::window ? e0 : eps(static_cast<Eigen::Index>(members[m]));
        const auto col = tt.probabilities.col(cols[m]);
        for (Eigen::Index f = 0; f < dim; ++f) {
            exact += col(f) * std::exp(-p.beta * (eps(f) - e_ref));
            binned += col(f) * std::exp(-p.beta * static_cast<double>(binning.index(eps(f)) - i0) * binning.delta);
        }
    }
    const auto omega = static_cast<double>(members.size());

    MicrocanonicalDeviation out;
    out.members = members;
    out.exact.kind = DeviationKind::microcanonical;
    out.exact.form = DeviationForm::operator_exact;
    out.exact.params = p;
    out.exact.seed = p.seed;
    out.exact.energy = e0;
    out.exact.omega = members.size();
    out.exact.value = exact / omega - 1.0;
    out.exact.dt_discrepancy = dt_discrepancy;
    out.binned = out.exact;
    out.binned.form = DeviationForm::binned;
    out.binned.value = binned / omega - 1.0;
    return out;
}

MicrocanonicalDeviation d_microcanonical(const HamiltonianSet& hs, double e0,
                                         const EnergyBinning& binning, const PropagateFn& propagate,
                                         ReferenceEnergy reference) {
    binning.validate();
    const auto members = window_members(hs, binning, e0);
    if (members.empty()) {
        std::ostringstream msg;
        msg << "d_microcanonical: empty energy window at E0 = " << e0;
        throw std::invalid_argument(msg.str());
    }
    const auto pset = propagate(members);
    return microcanonical_from_table(hs, e0, binning, transition_table(pset, hs), pset.discrepancy,
                                     reference);
}

std::vector<DeviationRecord> eigenstate_deviations(const HamiltonianSet& hs, const TransitionTable& tt,
                                                   double dt_discrepancy, ReferenceEnergy reference,
                                                   double shared_energy) {
    check_table(tt, hs);
    const auto& p = hs.params();
    const auto& eps = hs.eigenvalues();
    std::vector<DeviationRecord> out;
    out.reserve(tt.initial_indices.size());
    for (std::size_t j = 0; j < tt.initial_indices.size(); ++j) {
        const auto i = tt.initial_indices[j];
        const double e_i = eps(static_cast<Eigen::Index>(i));
        const double e_ref = reference == ReferenceEnergy::per_state ? e_i : shared_energy;
        const Eigen::ArrayXd weights = (-p.beta * (eps.array() - e_ref)).exp();
        DeviationRecord r;
        r.kind = DeviationKind::eigenstate;
        r.form = DeviationForm::operator_exact;
        r.params = p;
        r.seed = p.seed;
        r.energy = e_i;
        r.eigen_index = i;
        r.omega = 1;
        r.value = (tt.probabilities.col(static_cast<Eigen::Index>(j)).array() * weights).sum() - 1.0;
        r.dt_discrepancy = dt_discrepancy;
        out.push_back(r);
    }
    return out;
}

DeviationRecord d_eigenstate(const HamiltonianSet& hs, std::size_t index, const PropagateFn& propagate,
                             ReferenceEnergy reference, double shared_energy) {
    if (index >= hs.dim()) throw std::out_of_range("d_eigenstate: eigenstate index out of range");
    const std::size_t idx[] = {index};
    const auto pset = propagate(idx);
    return eigenstate_deviations(hs, transition_table(pset, hs), pset.discrepancy, reference, shared_energy)
        .front();
}

StiffnessProfile stiffness_from_table(const HamiltonianSet& hs, const EnergyBinning& binning,
                                      std::span<const double> energies, const TransitionTable& tt) {
    binning.validate();
    check_table(tt, hs);
    const auto& eps = hs.eigenvalues();
    const auto lookup = column_lookup(tt, hs.dim());
    const auto dim = static_cast<Eigen::Index>(hs.dim());

    auto stay_probability = [&](long col, long bin) {
        double s = 0.0;
        for (Eigen::Index f = 0; f < dim; ++f) {
            if (binning.index(eps(f)) == bin) s += tt.probabilities(f, col);
        }
        return s;
    };

    StiffnessProfile out;
    std::vector<bool> seen(hs.dim(), false);
    for (const double e : energies) {
        const auto members = window_members(hs, binning, e);
        const auto cols = require_members(lookup, members, e);
        const long bin = binning.index(e);
        double acc = 0.0;
        for (std::size_t m = 0; m < members.size(); ++m) {
            const double p_stay = stay_probability(cols[m], bin);
            acc += p_stay;
            if (!seen[members[m]]) {
                seen[members[m]] = true;
                out.eigenstates.push_back(StiffnessPoint{eps(static_cast<Eigen::Index>(members[m])), bin, 1,
                                                         members[m], p_stay / binning.delta});
            }
        }
        out.windows.push_back(StiffnessPoint{e, bin, members.size(), std::nullopt,
                                             acc / static_cast<double>(members.size()) / binning.delta});
    }
    std::sort(out.eigenstates.begin(), out.eigenstates.end(),
              [](const StiffnessPoint& a, const StiffnessPoint& b) { return *a.eigen_index < *b.eigen_index; });
    return out;
}

StiffnessProfile stiffness_profile(const HamiltonianSet& hs, const EnergyBinning& binning,
                                   std::span<const double> energies, const PropagateFn& propagate) {
    binning.validate();
    std::vector<std::size_t> all;
    for (const double e : energies) {
        const auto members = window_members(hs, binning, e);
        if (members.empty()) {
            std::ostringstream msg;
            msg << "stiffness_profile: empty energy window at E = " << e;
            throw std::invalid_argument(msg.str());
        }
        all.insert(all.end(), members.begin(), members.end());
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    const auto pset = propagate(all);
    return stiffness_from_table(hs, binning, energies, transition_table(pset, hs));
}

namespace {

// p_{F<-i} for every listed column, rows are bins starting at the lowest occupied one.
Eigen::MatrixXd per_state_bins(const TransitionTable& tt, const EnergyBinning& binning,
                               const HamiltonianSet& hs, long first) {
    const auto& eps = hs.eigenvalues();
    const long last = binning.index(eps(eps.size() - 1));
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(last - first + 1, tt.probabilities.cols());
    for (Eigen::Index j = 0; j < tt.probabilities.cols(); ++j) {
        for (Eigen::Index f = 0; f < eps.size(); ++f) {
            out(binning.index(eps(f)) - first, j) += tt.probabilities(f, j);
        }
    }
    return out;
}

}  // namespace

std::vector<SmoothnessCell> smoothness_profile(const TransitionTable& tt, const EnergyBinning& binning,
                                               const HamiltonianSet& hs) {
    binning.validate();
    check_table(tt, hs);
    const long first = binning.index(hs.eigenvalues()(0));
    const Eigen::MatrixXd per_state = per_state_bins(tt, binning, hs, first);

    std::map<long, std::vector<Eigen::Index>> by_bin;
    for (std::size_t j = 0; j < tt.initial_indices.size(); ++j) {
        const double e = hs.eigenvalues()(static_cast<Eigen::Index>(tt.initial_indices[j]));
        by_bin[binning.index(e)].push_back(static_cast<Eigen::Index>(j));
    }
    std::vector<SmoothnessCell> out;
    for (const auto& [bin, cols] : by_bin) {
        if (cols.size() < 2) continue;
        const auto n = static_cast<double>(cols.size());
        for (Eigen::Index r = 0; r < per_state.rows(); ++r) {
            // Shifted by the first member so identical columns give exactly zero.
            const double x0 = per_state(r, cols.front());
            double s1 = 0.0, s2 = 0.0;
            for (const auto j : cols) {
                const double dx = per_state(r, j) - x0;
                s1 += dx;
                s2 += dx * dx;
            }
            const double var = std::max(0.0, (s2 - s1 * s1 / n) / (n - 1.0));
            out.push_back(SmoothnessCell{bin, first + r, cols.size(), x0 + s1 / n, std::sqrt(var)});
        }
    }
    if (out.empty()) {
        throw std::invalid_argument("smoothness_profile: no initial bin holds at least two listed eigenstates");
    }
    return out;
}

double mean_smoothness_defect(std::span<const SmoothnessCell> cells) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells) {
        if (c.mean > 0.0) {
            sum += c.stddev;
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

namespace {

void check_weights(std::span<const double> w) {
    double total = 0.0;
    for (const double x : w) {
        if (!(x >= 0.0)) throw std::invalid_argument("average_over_work: negative initial-state weight");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-10) {
        throw std::invalid_argument("average_over_work: initial-state weights sum to " + std::to_string(total) +
                                    ", expected 1");
    }
}

}  // namespace

double average_over_work(const TransitionTable& tt, const HamiltonianSet& hs, const WorkFunction& h,
                         std::span<const double> weights) {
    check_table(tt, hs);
    if (weights.size() != tt.initial_indices.size()) {
        throw std::invalid_argument("average_over_work: one weight per table column required");
    }
    check_weights(weights);
    const auto& eps = hs.eigenvalues();
    double acc = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[j] == 0.0) continue;
        const double e_i = eps(static_cast<Eigen::Index>(tt.initial_indices[j]));
        double inner = 0.0;
        for (Eigen::Index f = 0; f < eps.size(); ++f) {
            inner += tt.probabilities(f, static_cast<Eigen::Index>(j)) * h(eps(f) - e_i);
        }
        acc += weights[j] * inner;
    }
    return acc;
}

double average_over_work(const CoarseGrained& cg, const WorkFunction& h, std::span<const BinWeight> weights) {
    std::vector<double> w;
    w.reserve(weights.size());
    for (const auto& bw : weights) w.push_back(bw.weight);
    check_weights(w);
    double acc = 0.0;
    for (const auto& bw : weights) {
        if (bw.weight == 0.0) continue;
        const WorkPdf* pdf = cg.pdf_for(bw.bin);
        if (pdf == nullptr) {
            throw std::invalid_argument("average_over_work: no work PDF for initial bin " + std::to_string(bw.bin));
        }
        double inner = 0.0;
        for (std::size_t k = 0; k < pdf->size(); ++k) inner += pdf->probabilities[k] * h(pdf->work(k));
        acc += bw.weight * inner;
    }
    return acc;
}

}  // namespace tpmwork
