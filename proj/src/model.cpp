#include "tpmwork/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "tpmwork/errors.hpp"
#include "tpmwork/linalg.hpp"

namespace tpmwork {

BathSpectrum bath_energies(std::size_t n, double beta, double e_min, double e_max) {
    if (n < 2) throw std::invalid_argument("bath_energies: N must be >= 2");
    if (!(e_max >= e_min)) throw std::invalid_argument("bath_energies: E_max must be >= E_min");
    if (!(beta > 0.0)) throw std::invalid_argument("bath_energies: beta must be > 0");

    // ln(a e^x + b e^y) = x + ln(a + b e^{y-x}) with x = beta E_max >= y = beta E_min
    const double gap = std::exp(beta * (e_min - e_max));
    BathSpectrum out;
    out.energies.resize(n);
    const auto nd = static_cast<double>(n);
    for (std::size_t j = 1; j <= n; ++j) {
        const double w = static_cast<double>(j) / nd;
        out.energies[j - 1] = e_max + std::log(w + (1.0 - w) * gap) / beta;
    }
    out.energies.back() = e_max;
    return out;
}

double bath_dos_slope(const BathSpectrum& bath, double bin_width) {
    const auto& e = bath.energies;
    if (e.size() < 2) throw std::invalid_argument("bath_dos_slope: need at least two levels");
    if (!(bin_width > 0.0)) throw std::invalid_argument("bath_dos_slope: bin_width must be > 0");
    const double hi = e.back();
    const auto nb = static_cast<std::size_t>(std::floor((hi - e.front()) / bin_width));
    if (nb < 2) throw std::invalid_argument("bath_dos_slope: fewer than two complete intervals");
    std::vector<double> count(nb, 0.0);
    for (const double x : e) {
        const auto k = static_cast<std::size_t>(std::floor((hi - x) / bin_width));
        if (k < nb) count[k] += 1.0;
    }
    double sw = 0.0, mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
        if (count[k] == 0.0) continue;
        const double center = hi - (static_cast<double>(k) + 0.5) * bin_width;
        sw += count[k];
        mx += count[k] * center;
        my += count[k] * std::log(count[k]);
    }
    mx /= sw;
    my /= sw;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
        if (count[k] == 0.0) continue;
        const double dx = hi - (static_cast<double>(k) + 0.5) * bin_width - mx;
        sxy += count[k] * dx * (std::log(count[k]) - my);
        sxx += count[k] * dx * dx;
    }
    if (sxx == 0.0) throw std::invalid_argument("bath_dos_slope: all levels in one interval");
    return sxy / sxx;
}

double bath_cumulative_slope(const BathSpectrum& bath) {
    const auto n = bath.energies.size();
    if (n < 2) throw std::invalid_argument("bath_cumulative_slope: need at least two levels");
    double mx = 0.0, my = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        mx += bath.energies[j];
        my += std::log(static_cast<double>(j + 1));
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double dx = bath.energies[j] - mx;
        sxy += dx * (std::log(static_cast<double>(j + 1)) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw std::invalid_argument("bath_cumulative_slope: degenerate spectrum");
    return sxy / sxx;
}

void write_bath_csv(std::ostream& out, const BathSpectrum& bath) {
    out << "j,energy\n";
    char buf[64];
    for (std::size_t j = 0; j < bath.energies.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", bath.energies[j]);
        out << (j + 1) << ',' << buf << '\n';
    }
}

double InteractionEnvelopes::g(double energy_sum) const noexcept {
    return std::exp(-beta * xi * (energy_sum - e_max) / 4.0);
}

double InteractionEnvelopes::f(double omega) const noexcept {
    return std::exp(-omega * omega / (2.0 * sigma_sq));
}

InteractionEnvelopes interaction_envelopes(const ModelParams& params) {
    return InteractionEnvelopes{params.beta, params.xi, params.E_bath_max, params.sigma_int_sq};
}

Eigen::MatrixXd draw_disorder(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto size = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd r(size, size);
    for (Eigen::Index a = 0; a < size; ++a) {
        for (Eigen::Index b = a; b < size; ++b) {
            const double x = normal(rng);
            r(a, b) = x;
            r(b, a) = x;
        }
    }
    return r;
}

Eigen::MatrixXd interaction_bath_block(const ModelParams& params, const BathSpectrum& bath,
                                       const Eigen::MatrixXd& disorder) {
    const auto n = static_cast<Eigen::Index>(bath.size());
    if (disorder.rows() != n || disorder.cols() != n) {
        throw std::invalid_argument("interaction_bath_block: disorder shape does not match bath");
    }
    const auto env = interaction_envelopes(params);
    const auto& e = bath.energies;
    Eigen::MatrixXd block(n, n);
    for (Eigen::Index l = 0; l < n; ++l) {
        for (Eigen::Index k = 0; k < n; ++k) {
            block(k, l) = env.g(e[k] + e[l]) * env.f(std::abs(e[k] - e[l])) * disorder(k, l);
        }
    }
    return block;
}

Eigen::MatrixXd build_interaction(const ModelParams& params, const BathSpectrum& bath,
                                  std::mt19937_64& rng) {
    const auto n = static_cast<Eigen::Index>(bath.size());
    const Eigen::MatrixXd block = interaction_bath_block(params, bath, draw_disorder(bath.size(), rng));
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    h.topRightCorner(n, n) = block;
    h.bottomLeftCorner(n, n) = block;
    return h;
}

Eigen::MatrixXd DriveOperator::apply(const Eigen::MatrixXd& x) const {
    const auto n = static_cast<Eigen::Index>(bath_dim);
    Eigen::MatrixXd y(x.rows(), x.cols());
    y.topRows(n) = x.bottomRows(n);
    y.bottomRows(n) = x.topRows(n);
    return y;
}

double HamiltonianSet::spectrum_center() const noexcept {
    if (eigenvalues_.size() == 0) return 0.0;
    return 0.5 * (eigenvalues_.minCoeff() + eigenvalues_.maxCoeff());
}

HamiltonianSet assemble_hamiltonian(const ModelParams& params, const BathSpectrum& bath,
                                    const Eigen::MatrixXd& interaction) {
    params.validate();
    const auto n = static_cast<Eigen::Index>(params.N);
    if (static_cast<Eigen::Index>(bath.size()) != n) {
        throw std::invalid_argument("assemble_hamiltonian: bath size does not match N");
    }
    if (interaction.rows() != 2 * n || interaction.cols() != 2 * n) {
        throw std::invalid_argument("assemble_hamiltonian: interaction must be 2N x 2N");
    }

    HamiltonianSet hs;
    hs.params_ = params;
    hs.bath_ = bath;
    hs.h0_ = params.alpha * interaction;
    for (Eigen::Index k = 0; k < n; ++k) {
        hs.h0_(k, k) += -0.5 * params.B_z + bath.energies[static_cast<std::size_t>(k)];
        hs.h0_(n + k, n + k) += 0.5 * params.B_z + bath.energies[static_cast<std::size_t>(k)];
    }

    auto eig = linalg::symmetric_eigen(hs.h0_);
    hs.eigenvalues_ = std::move(eig.values);
    hs.eigenvectors_ = std::move(eig.vectors);
    const auto& q = hs.eigenvectors_;

    const double scale = std::max(hs.h0_.cwiseAbs().maxCoeff(), 1e-300);
    const Eigen::MatrixXd rebuilt = q * hs.eigenvalues_.asDiagonal() * q.transpose();
    hs.reconstruction_residual_ = (rebuilt - hs.h0_).cwiseAbs().maxCoeff() / scale;
    Eigen::MatrixXd gram = q.transpose() * q;
    gram.diagonal().array() -= 1.0;
    hs.orthonormality_residual_ = gram.cwiseAbs().maxCoeff();

    if (!(hs.reconstruction_residual_ <= kReconstructionTolerance)) {
        std::ostringstream msg;
        msg << "eigendecomposition reconstruction residual " << hs.reconstruction_residual_
            << " exceeds " << kReconstructionTolerance;
        throw NumericalError(msg.str(), hs.reconstruction_residual_);
    }
    if (!(hs.orthonormality_residual_ <= kOrthonormalityTolerance)) {
        std::ostringstream msg;
        msg << "eigenvectors orthonormality residual " << hs.orthonormality_residual_
            << " exceeds " << kOrthonormalityTolerance;
        throw NumericalError(msg.str(), hs.orthonormality_residual_);
    }

    Eigen::MatrixXd v_eig = q.transpose() * hs.drive().apply(q);
    hs.drive_eigen_ = 0.5 * (v_eig + v_eig.transpose());
    return hs;
}

HamiltonianSet build_hamiltonian(const ModelParams& params) {
    params.validate();
    const auto bath = bath_energies(params.N, params.beta, params.E_bath_min, params.E_bath_max);
    std::mt19937_64 rng(params.seed);
    return assemble_hamiltonian(params, bath, build_interaction(params, bath, rng));
}

}  // namespace tpmwork
