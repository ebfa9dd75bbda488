#include "tpmwork/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tpmwork::theory {

double SyntheticEnsemble::omega_ini(long n) const {
    const double v = delta * z_ini * std::exp(beta * static_cast<double>(n) * delta);
    return round_omega ? std::round(v) : v;
}

double SyntheticEnsemble::omega_fin(long n) const {
    const double v = delta * z_fin * std::exp(beta * static_cast<double>(n) * delta);
    return round_omega ? std::round(v) : v;
}

double SyntheticEnsemble::kernel_moment() const {
    double m = 0.0;
    for (std::size_t k = 0; k < kernel.size(); ++k) {
        const auto shift = static_cast<double>(kernel_min_shift + static_cast<long>(k));
        m += kernel[k] * std::exp(-beta * delta * shift);
    }
    return m;
}

bool SyntheticEnsemble::is_consistent() const {
    const double total = std::accumulate(kernel.begin(), kernel.end(), 0.0);
    const double ratio = z_fin / z_ini;
    return std::abs(total - 1.0) <= 1e-12 && std::abs(kernel_moment() - ratio) <= 1e-12 * std::max(1.0, ratio);
}

SyntheticEnsemble make_consistent_ensemble(double beta, double delta, double z_ini, double z_fin,
                                           std::size_t bin_count, long half_width, std::mt19937_64& rng) {
    if (!(beta > 0.0) || !(delta > 0.0) || !(z_ini > 0.0) || !(z_fin > 0.0) || half_width < 1) {
        throw std::invalid_argument("make_consistent_ensemble: beta, delta, Z must be > 0 and half_width >= 1");
    }
    SyntheticEnsemble ens;
    ens.beta = beta;
    ens.delta = delta;
    ens.z_ini = z_ini;
    ens.z_fin = z_fin;
    ens.bin_count = bin_count;
    ens.kernel_min_shift = -half_width;

    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const auto width = static_cast<std::size_t>(2 * half_width + 1);
    std::vector<double> q(width);
    for (auto& x : q) x = uni(rng);
    const double qs = std::accumulate(q.begin(), q.end(), 0.0);
    for (auto& x : q) x /= qs;
    ens.kernel = q;
    const double base_moment = ens.kernel_moment();

    const double ratio = z_fin / z_ini;
    const double low = std::exp(-beta * delta * static_cast<double>(half_width));   // point mass at +K
    const double high = std::exp(beta * delta * static_cast<double>(half_width));   // point mass at -K
    if (!(ratio > low && ratio < high)) {
        std::ostringstream msg;
        msg << "make_consistent_ensemble: Z_fin/Z_ini = " << ratio << " outside (" << low << ", " << high
            << ") reachable with kernel half width " << half_width;
        throw std::invalid_argument(msg.str());
    }
    // (1 - t) m_q + t m_edge = ratio
    const bool use_upper = base_moment > ratio;
    const double edge = use_upper ? low : high;
    const double t = (base_moment - ratio) / (base_moment - edge);
    for (auto& x : ens.kernel) x *= (1.0 - t);
    ens.kernel[use_upper ? width - 1 : 0] += t;
    return ens;
}

Jr0Result jr0_check(const SyntheticEnsemble& ens) {
    if (ens.kernel.empty()) throw std::invalid_argument("jr0_check: empty kernel");
    const auto bins = static_cast<long>(ens.bin_count);
    const long lo = ens.kernel_min_shift;
    const long hi = ens.kernel_max_shift();
    const long mid = bins / 2;
    // Initial bin mid must reach every final bin mid + D; final bin mid must be reachable
    // from every initial bin mid - D.
    if (mid + lo < 0 || mid + hi >= bins || mid - hi < 0 || mid - lo >= bins) {
        std::ostringstream msg;
        msg << "jr0_check: kernel support [" << lo << ", " << hi << "] truncated by " << bins << " bins";
        throw std::invalid_argument(msg.str());
    }

    auto p = [&](long shift) {
        return (shift < lo || shift > hi) ? 0.0 : ens.kernel[static_cast<std::size_t>(shift - lo)];
    };
    Jr0Result out;
    for (long f = 0; f < bins; ++f) {
        out.lhs += p(f - mid) * std::exp(-ens.beta * ens.delta * static_cast<double>(f - mid));
    }
    out.rhs = ens.z_fin / ens.z_ini;

    auto aggregate = [&](long f) {
        double s = 0.0;
        for (long i = 0; i < bins; ++i) s += ens.omega_ini(i) * p(f - i);
        return s;
    };
    out.rhs_via_dos = out.rhs * aggregate(mid) / ens.omega_fin(mid);
    for (long f = hi; f - lo < bins; ++f) {
        const double of = ens.omega_fin(f);
        if (of <= 0.0) continue;
        out.max_aggregate_residual = std::max(out.max_aggregate_residual, std::abs(aggregate(f) - of) / of);
    }
    out.consistent = ens.is_consistent();
    return out;
}

FreeEnergy free_energy_identities(double z, double beta, double energy, double h) {
    if (!(z > 0.0) || !(beta > 0.0)) {
        throw std::invalid_argument("free_energy_identities: Z and beta must be > 0");
    }
    auto entropy = [&](double u) { return std::log(z) + beta * u; };
    FreeEnergy out;
    out.free_energy = -std::log(z) / beta;
    out.entropy = entropy(energy);
    out.identity_residual = out.free_energy - (energy - out.entropy / beta);
    out.entropy_slope = (entropy(energy + h) - entropy(energy)) / h;
    return out;
}

double AggregateResiduals::max_abs() const {
    double m = 0.0;
    for (const double r : per_state) m = std::max(m, std::abs(r));
    for (const double r : per_bin) m = std::max(m, std::abs(r));
    return m;
}

AggregateResiduals doubly_stochastic_aggregate(const TransitionTable& tt, const EnergyBinning& binning,
                                               const HamiltonianSet& hs) {
    AggregateResiduals out;
    std::vector<bool> listed(hs.dim(), false);
    for (const auto i : tt.initial_indices) {
        if (i < hs.dim()) listed[i] = true;
    }
    out.complete = std::all_of(listed.begin(), listed.end(), [](bool b) { return b; });

    CoarseGrained cg;
    try {
        cg = coarse_grain(tt, binning, hs);
    } catch (const std::invalid_argument&) {
        return out;  // not even one initial bin is complete
    }
    out.first_bin = cg.first_bin;
    for (const auto& pdf : cg.pdfs) out.checkable_initial_bins.push_back(pdf.initial_bin);
    if (!out.complete) return out;

    const auto nbins = cg.bin_count();
    out.per_state.assign(nbins, 0.0);
    out.per_bin.assign(nbins, 0.0);
    for (std::size_t r = 0; r < nbins; ++r) {
        out.per_state[r] = cg.per_state.row(static_cast<Eigen::Index>(r)).sum();
        for (const auto& pdf : cg.pdfs) {
            out.per_bin[r] += static_cast<double>(cg.omega_of(pdf.initial_bin)) * pdf.probabilities[r];
        }
        out.per_state[r] -= static_cast<double>(cg.omega[r]);
        out.per_bin[r] -= static_cast<double>(cg.omega[r]);
    }
    return out;
}

}  // namespace tpmwork::theory
