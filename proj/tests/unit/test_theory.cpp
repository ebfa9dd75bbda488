#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "tpmwork/theory.hpp"

using namespace tpmwork;
using namespace tpmwork::theory;

TEST_CASE("delta kernel") {
    SyntheticEnsemble ens;
    ens.kernel = {1.0};
    const auto r = jr0_check(ens);
    CHECK(r.lhs == 1.0);
    CHECK(r.rhs == 1.0);
    CHECK(r.consistent);
    CHECK(r.max_aggregate_residual < 1e-12);
}

TEST_CASE("consistent kernels satisfy the stiff JR to 1e-12") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double beta = u(rng);
        const double z_ini = u(rng);
        const double z_fin = z_ini * std::exp(0.3 * (u(rng) - 1.25));
        const auto ens = make_consistent_ensemble(beta, 0.06, z_ini, z_fin, 301, 20, rng);
        REQUIRE(ens.is_consistent());
        const double total = std::accumulate(ens.kernel.begin(), ens.kernel.end(), 0.0);
        CHECK(std::abs(total - 1.0) < 1e-14);
        for (const double p : ens.kernel) CHECK(p >= 0.0);

        const auto r = jr0_check(ens);
        CHECK(std::abs(r.lhs - r.rhs) < 1e-12);
        CHECK(std::abs(r.rhs_via_dos - r.rhs) < 1e-12 * r.rhs);
        CHECK(r.max_aggregate_residual < 1e-12);

        // Symbolic sum: lhs = sum_D p(D) e^{-beta delta D}.
        double sym = 0.0;
        for (std::size_t k = 0; k < ens.kernel.size(); ++k) {
            sym += ens.kernel[k] * std::exp(-beta * 0.06 * static_cast<double>(ens.kernel_min_shift + static_cast<long>(k)));
        }
        CHECK(std::abs(r.lhs - sym) < 1e-13);
    }
}

TEST_CASE("inconsistent kernels are flagged") {
    SyntheticEnsemble ens;
    ens.kernel_min_shift = -1;
    ens.kernel = {0.2, 0.5, 0.3};
    const auto r = jr0_check(ens);
    CHECK_FALSE(r.consistent);
    CHECK(std::abs(r.lhs - r.rhs) > 1e-4);
    CHECK(r.max_aggregate_residual > 1e-4);
}

TEST_CASE("rounded densities of states drift") {
    std::mt19937_64 rng(1);
    auto ens = make_consistent_ensemble(1.0, 0.06, 200.0, 200.0, 201, 10, rng);
    ens.round_omega = true;
    const auto r = jr0_check(ens);
    CHECK(std::abs(r.lhs - r.rhs) < 1e-12);  // the kernel moment does not see the rounding
    CHECK(r.max_aggregate_residual > 0.0);
    CHECK(r.max_aggregate_residual < 0.1);
}

TEST_CASE("high temperature limit") {
    std::mt19937_64 rng(2);
    const auto ens = make_consistent_ensemble(1e-9, 0.06, 1.0, 1.0, 201, 10, rng);
    const auto r = jr0_check(ens);
    CHECK(r.lhs == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.rhs == 1.0);
}

TEST_CASE("truncated support is rejected") {
    SyntheticEnsemble ens;
    ens.bin_count = 11;
    ens.kernel_min_shift = -8;
    ens.kernel.assign(17, 1.0 / 17.0);
    CHECK_THROWS_AS(jr0_check(ens), std::invalid_argument);
    std::mt19937_64 rng(3);
    CHECK_THROWS_AS(make_consistent_ensemble(1.0, 0.06, 1.0, 100.0, 201, 2, rng), std::invalid_argument);
}

TEST_CASE("free energy identities") {
    const auto unit = free_energy_identities(1.0, 2.0, 3.0);
    CHECK(unit.free_energy == 0.0);
    CHECK(unit.entropy == 6.0);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int k = 0; k < 100; ++k) {
        const double z = u(rng), beta = u(rng), energy = u(rng) - 5.0;
        const auto f = free_energy_identities(z, beta, energy);
        CHECK(std::abs(f.identity_residual) <= 1e-14 * std::max(1.0, std::abs(energy)) * 10.0);
        CHECK(f.entropy_slope == doctest::Approx(beta).epsilon(1e-9));
    }
    CHECK_THROWS_AS(free_energy_identities(0.0, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(free_energy_identities(1.0, -1.0, 0.0), std::invalid_argument);
}

TEST_CASE("aggregate double stochasticity") {
    ModelParams p;
    p.N = 4;
    p.alpha = 0.3;
    const auto hs = build_hamiltonian(p);
    std::vector<std::size_t> all(hs.dim());
    std::iota(all.begin(), all.end(), 0);
    PropagatorConfig cfg;
    cfg.steps_per_period = 512;
    EnergyBinning bins;
    bins.delta = 0.3;
    const auto tt = transition_table(propagate(hs, cfg, all), hs);
    const auto res = doubly_stochastic_aggregate(tt, bins, hs);
    CHECK(res.complete);
    CHECK(res.max_abs() < 1e-9);

    p.lambda = 0.0;
    const auto hs0 = build_hamiltonian(p);
    const auto res0 = doubly_stochastic_aggregate(transition_table(propagate(hs0, cfg, all), hs0), bins, hs0);
    CHECK(res0.max_abs() < 1e-14);

    // Row sums of a unitary table are 1.
    CHECK((tt.probabilities.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);

    const std::vector<std::size_t> part{0, 1};
    const auto partial = doubly_stochastic_aggregate(transition_table(propagate(hs, cfg, part), hs), bins, hs);
    CHECK_FALSE(partial.complete);
    CHECK(partial.per_bin.empty());
}
