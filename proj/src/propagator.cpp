#include "tpmwork/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tpmwork/errors.hpp"

namespace tpmwork {

std::vector<std::string> PropagatorConfig::violations() const {
    std::vector<std::string> out;
    if (steps_per_period < 16) out.emplace_back("steps_per_period must be >= 16");
    if (!(tolerance > 0.0)) out.emplace_back("tolerance must be > 0");
    return out;
}

void PropagatorConfig::validate() const {
    auto v = violations();
    if (v.empty()) return;
    std::ostringstream msg;
    msg << "invalid propagator configuration:";
    for (const auto& s : v) msg << "\n  - " << s;
    throw ConfigError(msg.str(), std::move(v));
}

std::size_t step_count(const ModelParams& params, std::size_t steps_per_period) {
    const double steps = std::round(static_cast<double>(steps_per_period) * params.n_periods);
    return std::max<std::size_t>(1, static_cast<std::size_t>(steps));
}

namespace {

// Multiplies each row f of the split state [Re | Im] by exp(-i sign phase_f).
void apply_phases(Eigen::MatrixXd& x, Eigen::Index k, const Eigen::ArrayXd& cos_p,
                  const Eigen::ArrayXd& sin_p) {
    auto re = x.leftCols(k).array();
    auto im = x.rightCols(k).array();
    const Eigen::ArrayXXd re_old = re;
    re = re.colwise() * cos_p + im.colwise() * sin_p;
    im = im.colwise() * cos_p - re_old.colwise() * sin_p;
}

}  // namespace

std::vector<double> substep_weights(Scheme scheme) {
    switch (scheme) {
        case Scheme::strang2:
            return {1.0};
        case Scheme::suzuki4: {
            const double p = 1.0 / (4.0 - std::cbrt(4.0));
            return {p, p, 1.0 - 4.0 * p, p, p};
        }
    }
    throw std::invalid_argument("substep_weights: unknown scheme");
}

namespace {

struct PhaseTable {
    Eigen::ArrayXd c;
    Eigen::ArrayXd s;
};

PhaseTable make_phases(const Eigen::ArrayXd& eps, double length, double sign) {
    return {(length * eps).cos(), sign * (length * eps).sin()};
}

}  // namespace

Eigen::MatrixXcd evolve(const HamiltonianSet& hs, const Eigen::MatrixXcd& states, std::size_t steps,
                        Scheme scheme, Direction direction) {
    const std::vector<double> lambdas(static_cast<std::size_t>(states.cols()), hs.params().lambda);
    return evolve(hs, states, steps, scheme, direction, lambdas);
}

Eigen::MatrixXcd evolve(const HamiltonianSet& hs, const Eigen::MatrixXcd& states, std::size_t steps,
                        Scheme scheme, Direction direction, std::span<const double> column_lambdas) {
    const auto d = static_cast<Eigen::Index>(hs.dim());
    if (states.rows() != d) throw std::invalid_argument("evolve: state dimension mismatch");
    if (column_lambdas.size() != static_cast<std::size_t>(states.cols())) {
        throw std::invalid_argument("evolve: one drive strength per column required");
    }
    if (steps == 0) throw std::invalid_argument("evolve: steps must be positive");

    const auto& p = hs.params();
    const bool forward = direction == Direction::forward;
    const double sign = forward ? 1.0 : -1.0;
    const double dt = p.duration() / static_cast<double>(steps);
    const Eigen::Index k = states.cols();
    const Eigen::Map<const Eigen::ArrayXd> lam(column_lambdas.data(), k);
    const bool driven = (lam != 0.0).any();
    Eigen::ArrayXd c(k), s(k);

    const auto w = substep_weights(scheme);
    const std::size_t ns = w.size();
    std::vector<double> offset(ns);  // substep midpoints within a step, in units of dt
    double acc = 0.0;
    for (std::size_t j = 0; j < ns; ++j) {
        offset[j] = acc + 0.5 * w[j];
        acc += w[j];
    }

    // Phase j sits in front of substep j; phase ns closes the step and merges with the
    // opening phase of the next one. Weights are palindromic, so the same tables serve
    // the adjoint traversal.
    const Eigen::ArrayXd eps = hs.eigenvalues().array();
    std::vector<PhaseTable> inner(ns);
    inner[0] = make_phases(eps, 0.5 * w[0] * dt, sign);
    for (std::size_t j = 1; j < ns; ++j) {
        inner[j] = make_phases(eps, 0.5 * (w[j - 1] + w[j]) * dt, sign);
    }
    const PhaseTable wrap = make_phases(eps, 0.5 * (w[ns - 1] + w[0]) * dt, sign);

    Eigen::MatrixXd x(d, 2 * k);
    x.leftCols(k) = states.real();
    x.rightCols(k) = states.imag();
    Eigen::MatrixXd y(d, 2 * k);
    const auto& v = hs.drive_eigenbasis();

    apply_phases(x, k, inner[0].c, inner[0].s);
    for (std::size_t n = 0; n < steps; ++n) {
        const std::size_t m = forward ? n : steps - 1 - n;
        for (std::size_t jj = 0; jj < ns; ++jj) {
            const std::size_t j = forward ? jj : ns - 1 - jj;
            if (jj > 0) {
                const auto& ph = inner[forward ? j : j + 1];
                apply_phases(x, k, ph.c, ph.s);
            }
            const double t_mid = (static_cast<double>(m) + offset[j]) * dt;
            const double drive = sign * std::sin(p.omega_prot * t_mid) * w[j] * dt;
            if (driven && drive != 0.0) {
                c = (drive * lam).cos();
                s = (drive * lam).sin();
                y.noalias() = v * x;
                // (cos - i sin V)(re + i im), one angle per column
                x.leftCols(k) = x.leftCols(k) * c.matrix().asDiagonal();
                x.leftCols(k).noalias() += y.rightCols(k) * s.matrix().asDiagonal();
                x.rightCols(k) = x.rightCols(k) * c.matrix().asDiagonal();
                x.rightCols(k).noalias() -= y.leftCols(k) * s.matrix().asDiagonal();
            }
        }
        if (n + 1 < steps) {
            apply_phases(x, k, wrap.c, wrap.s);
        }
    }
    apply_phases(x, k, inner[0].c, inner[0].s);

    Eigen::MatrixXcd out(d, k);
    out.real() = x.leftCols(k);
    out.imag() = x.rightCols(k);
    return out;
}

std::vector<PropagatedSet> propagate_batch(const HamiltonianSet& hs, const PropagatorConfig& config,
                                           std::span<const std::size_t> initial_indices,
                                           std::span<const double> lambdas) {
    config.validate();
    const auto d = static_cast<Eigen::Index>(hs.dim());
    const auto k = static_cast<Eigen::Index>(initial_indices.size());
    for (const auto i : initial_indices) {
        if (i >= hs.dim()) {
            throw std::out_of_range("propagate: eigenstate index " + std::to_string(i) +
                                    " outside [0, " + std::to_string(hs.dim()) + ")");
        }
    }

    const auto& p = hs.params();
    const double duration = p.duration();
    const std::size_t base_steps = step_count(p, config.steps_per_period);
    std::vector<PropagatedSet> out(lambdas.size());

    // Driven protocols share one stacked evolution; lambda = 0 is exact.
    std::vector<std::size_t> driven;
    for (std::size_t b = 0; b < lambdas.size(); ++b) {
        auto& set = out[b];
        set.initial_indices.assign(initial_indices.begin(), initial_indices.end());
        if (lambdas[b] == 0.0) {
            set.final_states = Eigen::MatrixXcd::Zero(d, k);
            for (Eigen::Index j = 0; j < k; ++j) {
                const auto i = static_cast<Eigen::Index>(initial_indices[static_cast<std::size_t>(j)]);
                set.final_states(i, j) = std::polar(1.0, -hs.eigenvalues()(i) * duration);
            }
            set.steps = base_steps;
            set.dt_used = duration / static_cast<double>(base_steps);
            set.discrepancy = 0.0;
        } else {
            driven.push_back(b);
        }
    }
    if (driven.empty() || k == 0) {
        for (const auto b : driven) {
            out[b].final_states = Eigen::MatrixXcd::Zero(d, 0);
            out[b].steps = base_steps;
            out[b].dt_used = duration / static_cast<double>(base_steps);
        }
        return out;
    }

    const auto nb = static_cast<Eigen::Index>(driven.size());
    Eigen::MatrixXcd psi0 = Eigen::MatrixXcd::Zero(d, nb * k);
    std::vector<double> column_lambdas(static_cast<std::size_t>(nb * k));
    for (Eigen::Index b = 0; b < nb; ++b) {
        for (Eigen::Index j = 0; j < k; ++j) {
            psi0(static_cast<Eigen::Index>(initial_indices[static_cast<std::size_t>(j)]), b * k + j) = 1.0;
            column_lambdas[static_cast<std::size_t>(b * k + j)] = lambdas[driven[static_cast<std::size_t>(b)]];
        }
    }
    auto run = [&](std::size_t steps) {
        return evolve(hs, psi0, steps, config.scheme, Direction::forward, column_lambdas);
    };
    // Per-protocol max column distance.
    auto distances = [&](const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
        const Eigen::RowVectorXd col = (a - b).colwise().norm();
        std::vector<double> dist(static_cast<std::size_t>(nb));
        for (Eigen::Index q = 0; q < nb; ++q) dist[static_cast<std::size_t>(q)] = col.segment(q * k, k).maxCoeff();
        return dist;
    };

    std::size_t steps = base_steps;
    Eigen::MatrixXcd result = run(steps);
    std::vector<double> disc(static_cast<std::size_t>(nb), std::numeric_limits<double>::quiet_NaN());
    if (config.richardson_check) {
        Eigen::MatrixXcd fine = run(2 * steps);
        steps *= 2;
        disc = distances(result, fine);
        if (*std::max_element(disc.begin(), disc.end()) > config.tolerance) {
            Eigen::MatrixXcd finer = run(2 * steps);
            steps *= 2;
            disc = distances(fine, finer);
            fine = std::move(finer);
            const double worst = *std::max_element(disc.begin(), disc.end());
            if (worst > config.tolerance) {
                std::ostringstream msg;
                msg << "propagation did not converge: dt/2 vs dt/4 discrepancy " << worst
                    << " exceeds tolerance " << config.tolerance << " at " << steps << " steps";
                throw NonconvergenceError(msg.str(), worst);
            }
        }
        result = std::move(fine);
    }

    const double norm_defect = (result.colwise().norm().array() - 1.0).abs().maxCoeff();
    if (norm_defect > 1e-9) {
        throw NumericalError("propagated state lost normalization", norm_defect);
    }
    for (Eigen::Index q = 0; q < nb; ++q) {
        auto& set = out[driven[static_cast<std::size_t>(q)]];
        set.final_states = result.middleCols(q * k, k);
        set.steps = steps;
        set.dt_used = duration / static_cast<double>(steps);
        set.discrepancy = disc[static_cast<std::size_t>(q)];
    }
    return out;
}

PropagatedSet propagate(const HamiltonianSet& hs, const PropagatorConfig& config,
                        std::span<const std::size_t> initial_indices) {
    const double lambda = hs.params().lambda;
    return std::move(propagate_batch(hs, config, initial_indices, std::span<const double>(&lambda, 1)).front());
}

}  // namespace tpmwork
