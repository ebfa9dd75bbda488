#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "oracle/brute_force.hpp"
#include "tpmwork/errors.hpp"
#include "tpmwork/workstats.hpp"

using namespace tpmwork;

namespace {

ModelParams small(std::size_t n, double alpha = 0.3, double lambda = 0.25) {
    ModelParams p;
    p.N = n;
    p.alpha = alpha;
    p.lambda = lambda;
    p.seed = 3;
    return p;
}

std::vector<std::size_t> all_indices(const HamiltonianSet& hs) {
    std::vector<std::size_t> idx(hs.dim());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

// Random column-stochastic table over every eigenstate.
TransitionTable random_table(const HamiltonianSet& hs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto d = static_cast<Eigen::Index>(hs.dim());
    TransitionTable tt;
    tt.initial_indices = all_indices(hs);
    tt.probabilities.resize(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index f = 0; f < d; ++f) tt.probabilities(f, j) = u(rng);
        tt.probabilities.col(j) /= tt.probabilities.col(j).sum();
    }
    return tt;
}

PropagatorConfig fine() {
    PropagatorConfig c;
    c.steps_per_period = 1024;
    return c;
}

}  // namespace

TEST_CASE("undriven statistics are trivial") {
    const auto hs = build_hamiltonian(small(60, 0.4, 0.0));
    const EnergyBinning bins;
    const double e0 = hs.spectrum_center();
    const auto members = window_members(hs, bins, e0);
    REQUIRE(!members.empty());
    const auto prop = make_propagate_fn(hs, PropagatorConfig{});

    const auto pset = prop(members);
    const auto tt = transition_table(pset, hs);
    for (std::size_t j = 0; j < members.size(); ++j) {
        for (Eigen::Index f = 0; f < tt.probabilities.rows(); ++f) {
            const double expect = f == static_cast<Eigen::Index>(members[j]) ? 1.0 : 0.0;
            CHECK(tt.probabilities(f, static_cast<Eigen::Index>(j)) == doctest::Approx(expect).epsilon(1e-14));
        }
    }
    const auto cg = coarse_grain(tt, bins, hs);
    REQUIRE(cg.pdfs.size() == 1);
    const auto& pdf = cg.pdfs.front();
    for (std::size_t k = 0; k < pdf.size(); ++k) {
        CHECK(pdf.density(k) == doctest::Approx(pdf.work(k) == 0.0 ? 1.0 / bins.delta : 0.0));
    }

    const auto mc = d_microcanonical(hs, e0, bins, prop);
    CHECK(std::abs(mc.exact.value) <= std::exp(hs.params().beta * bins.delta) - 1.0);
    CHECK(std::abs(mc.binned.value) < 1e-14);
    for (const auto& r : eigenstate_deviations(hs, tt, 0.0)) CHECK(std::abs(r.value) < 1e-10);
    CHECK(std::abs(d_eigenstate(hs, 5, prop).value) < 1e-10);

    const double energies[] = {e0, e0 + 0.5};
    const auto stiff = stiffness_profile(hs, bins, energies, prop);
    for (const auto& pt : stiff.windows) CHECK(pt.p0 == doctest::Approx(1.0 / bins.delta));
    for (const auto& pt : stiff.eigenstates) CHECK(pt.p0 == doctest::Approx(1.0 / bins.delta));

    const auto all = transition_table(prop(all_indices(hs)), hs);
    for (const auto& c : smoothness_profile(all, bins, hs)) {
        if (c.initial_bin == c.final_bin) CHECK(c.stddev < 1e-15);
    }
}

TEST_CASE("driven tables are column stochastic") {
    const auto hs = build_hamiltonian(small(80, 0.4));
    std::vector<std::size_t> idx{70, 80, 90};
    const auto tt = transition_table(propagate(hs, PropagatorConfig{}, idx), hs);
    CHECK(tt.max_column_defect() < 1e-9);
    CHECK(tt.probabilities.minCoeff() >= 0.0);
    CHECK(tt.probabilities.maxCoeff() <= 1.0);
}

TEST_CASE("coarse graining matches enumeration") {
    const auto hs = build_hamiltonian(small(3, 0.8));
    EnergyBinning bins;
    bins.delta = 0.5;
    const auto tt = random_table(hs, 5);
    const auto cg = coarse_grain(tt, bins, hs);
    const auto& eps = hs.eigenvalues();
    for (const auto& pdf : cg.pdfs) {
        for (std::size_t k = 0; k < pdf.size(); ++k) {
            double sum = 0.0;
            int members = 0;
            for (Eigen::Index i = 0; i < 6; ++i) {
                if (std::floor(eps(i) / 0.5) != pdf.initial_bin) continue;
                ++members;
                for (Eigen::Index f = 0; f < 6; ++f) {
                    if (std::floor(eps(f) / 0.5) == pdf.final_bin(k)) sum += tt.probabilities(f, i);
                }
            }
            CHECK(pdf.probabilities[k] == doctest::Approx(sum / members).epsilon(1e-14));
        }
        CHECK(pdf.normalization() == doctest::Approx(1.0).epsilon(1e-8));
    }

    // <W> over the eigenstates, both granularities of h = 1 and h = W.
    std::vector<double> w(6, 1.0 / 6.0);
    double expect = 0.0;
    for (Eigen::Index i = 0; i < 6; ++i)
        for (Eigen::Index f = 0; f < 6; ++f) expect += tt.probabilities(f, i) * (eps(f) - eps(i)) / 6.0;
    CHECK(average_over_work(tt, hs, [](double x) { return x; }, w) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(average_over_work(tt, hs, [](double) { return 1.0; }, w) == doctest::Approx(1.0).epsilon(1e-14));

    const BinWeight one{cg.pdfs.front().initial_bin, 1.0};
    CHECK(average_over_work(cg, [](double) { return 1.0; }, std::span(&one, 1)) ==
          doctest::Approx(1.0).epsilon(1e-14));
    const auto& pdf = cg.pdfs.front();
    double binned_w = 0.0;
    for (std::size_t k = 0; k < pdf.size(); ++k) binned_w += pdf.probabilities[k] * pdf.work(k);
    CHECK(average_over_work(cg, [](double x) { return x; }, std::span(&one, 1)) ==
          doctest::Approx(binned_w).epsilon(1e-14));

    w[0] = 0.5;
    CHECK_THROWS_AS(average_over_work(tt, hs, [](double) { return 1.0; }, w), std::invalid_argument);
    w[0] = -1.0 / 6.0;
    CHECK_THROWS_AS(average_over_work(tt, hs, [](double) { return 1.0; }, w), std::invalid_argument);
}

TEST_CASE("deviation identities") {
    const auto hs = build_hamiltonian(small(40, 0.4));
    EnergyBinning bins;
    bins.delta = 0.2;
    const double e0 = hs.spectrum_center();
    const auto prop = make_propagate_fn(hs, PropagatorConfig{});
    const auto members = window_members(hs, bins, e0);
    REQUIRE(members.size() >= 2);
    const auto pset = prop(members);
    const auto tt = transition_table(pset, hs);

    const auto mc = microcanonical_from_table(hs, e0, bins, tt, pset.discrepancy);
    const auto mc_state = microcanonical_from_table(hs, e0, bins, tt, pset.discrepancy, ReferenceEnergy::per_state);
    const auto es = eigenstate_deviations(hs, tt, pset.discrepancy);
    double mean = 0.0;
    for (const auto& r : es) mean += r.value / static_cast<double>(es.size());
    CHECK(mean == doctest::Approx(mc_state.exact.value).epsilon(1e-12));

    const double beta = hs.params().beta;
    CHECK(std::abs(mc.binned.value - mc.exact.value) <= 2.0 * (std::exp(beta * bins.delta) - 1.0));
    CHECK(mc.exact.omega == members.size());
    CHECK(mc.exact.form == DeviationForm::operator_exact);
    CHECK(mc.binned.form == DeviationForm::binned);

    // <e^{-beta W}> with uniform weights over the window is D_mc + 1 (state-referenced form).
    std::vector<double> w(members.size(), 1.0 / static_cast<double>(members.size()));
    const double jr = average_over_work(tt, hs, [beta](double x) { return std::exp(-beta * x); }, w);
    CHECK(jr == doctest::Approx(mc_state.exact.value + 1.0).epsilon(1e-13));

    // Window-referenced eigenstate deviations reproduce D_mc itself.
    const auto es_shared = eigenstate_deviations(hs, tt, 0.0, ReferenceEnergy::window, e0);
    double mean_shared = 0.0;
    for (const auto& r : es_shared) mean_shared += r.value / static_cast<double>(es_shared.size());
    CHECK(mean_shared == doctest::Approx(mc.exact.value).epsilon(1e-12));
}

TEST_CASE("small instances match the dense oracle") {
    for (const std::size_t n : {2u, 4u}) {
        const auto p = small(n, 0.3);
        const auto hs = build_hamiltonian(p);
        oracle::Model m;
        m.n = static_cast<int>(n);
        m.alpha = p.alpha;
        m.lambda = p.lambda;
        m.seed = p.seed;
        const auto cfg = fine();
        const auto ref = oracle::solve(m, 10 * static_cast<int>(step_count(p, cfg.steps_per_period)));

        const auto idx = all_indices(hs);
        const auto pset = propagate(hs, cfg, idx);
        const auto tt = transition_table(pset, hs);
        CHECK((tt.probabilities - ref.p).cwiseAbs().maxCoeff() < 1e-8);
        const Eigen::MatrixXcd q = hs.eigenvectors().cast<std::complex<double>>();
        CHECK((q * pset.final_states * q.adjoint() - ref.u).cwiseAbs().maxCoeff() < 1e-8);

        const auto prop = make_propagate_fn(hs, cfg);
        for (const double delta : {0.06, 0.7}) {
            EnergyBinning bins;
            bins.delta = delta;
            const double e0 = hs.eigenvalues()(static_cast<Eigen::Index>(n));
            const auto mc = d_microcanonical(hs, e0, bins, prop);
            const std::vector<int> members(mc.members.begin(), mc.members.end());
            CAPTURE(members.size());
            CHECK(mc.exact.value == doctest::Approx(oracle::deviation(m, ref, members, e0)).epsilon(1e-8));
        }
        for (std::size_t i = 0; i < hs.dim(); ++i) {
            const auto es = d_eigenstate(hs, i, prop);
            const double expect = oracle::deviation(m, ref, {static_cast<int>(i)}, ref.eps(static_cast<Eigen::Index>(i)));
            CHECK(std::abs(es.value - expect) < 1e-8);
        }
    }
}

TEST_CASE("stiffness and smoothness enumerations") {
    const auto hs = build_hamiltonian(small(3, 0.8));
    EnergyBinning bins;
    bins.delta = 1.5;
    auto tt = random_table(hs, 9);
    const auto& eps = hs.eigenvalues();

    const double e = eps(2);
    const double energies[] = {e};
    const auto prof = stiffness_from_table(hs, bins, energies, tt);
    const long bin = bins.index(e);
    double stay = 0.0;
    int members = 0;
    for (Eigen::Index i = 0; i < 6; ++i) {
        if (bins.index(eps(i)) != bin) continue;
        ++members;
        for (Eigen::Index f = 0; f < 6; ++f)
            if (bins.index(eps(f)) == bin) stay += tt.probabilities(f, i);
    }
    REQUIRE(prof.windows.size() == 1);
    CHECK(prof.windows[0].p0 == doctest::Approx(stay / members / bins.delta).epsilon(1e-14));
    CHECK(prof.eigenstates.size() == static_cast<std::size_t>(members));

    // Identical columns inside every bin give zero defect.
    for (Eigen::Index i = 1; i < 6; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            if (bins.index(eps(i)) == bins.index(eps(j))) {
                tt.probabilities.col(i) = tt.probabilities.col(j);
                break;
            }
        }
    }
    bool any = false;
    for (const auto& c : smoothness_profile(tt, bins, hs)) {
        any = true;
        CHECK(c.stddev == 0.0);
    }
    CHECK(any);

    const auto fresh = random_table(hs, 10);
    for (const auto& c : smoothness_profile(fresh, bins, hs)) {
        std::vector<double> v;
        for (Eigen::Index i = 0; i < 6; ++i) {
            if (bins.index(eps(i)) != c.initial_bin) continue;
            double s = 0.0;
            for (Eigen::Index f = 0; f < 6; ++f)
                if (bins.index(eps(f)) == c.final_bin) s += fresh.probabilities(f, i);
            v.push_back(s);
        }
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (const double x : v) ss += (x - mean) * (x - mean);
        CHECK(c.mean == doctest::Approx(mean).epsilon(1e-14));
        CHECK(c.stddev == doctest::Approx(std::sqrt(ss / static_cast<double>(v.size() - 1))).epsilon(1e-12));
    }
}

TEST_CASE("work PDF CSV") {
    WorkPdf pdf;
    pdf.initial_bin = 3;
    pdf.first_final_bin = 2;
    pdf.delta = 0.5;
    pdf.probabilities = {0.25, 0.75};
    std::ostringstream out;
    write_work_pdf_csv(out, pdf);
    CHECK(out.str() == "I,F,W,P\n3,2,-0.5,0.5\n3,3,0,1.5\n");
    CHECK(pdf.normalization() == 1.0);
}

TEST_CASE("workstats errors") {
    const auto hs = build_hamiltonian(small(20, 0.4));
    const EnergyBinning bins;
    const auto prop = make_propagate_fn(hs, PropagatorConfig{});
    CHECK_THROWS_AS(d_microcanonical(hs, 100.0, bins, prop), std::invalid_argument);
    const double far[] = {-50.0};
    CHECK_THROWS_AS(stiffness_profile(hs, bins, far, prop), std::invalid_argument);
    EnergyBinning bad;
    bad.delta = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    const std::vector<std::size_t> one{5};
    const auto tt = transition_table(propagate(hs, PropagatorConfig{}, one), hs);
    const auto other = build_hamiltonian(small(10, 0.4));
    CHECK_THROWS_AS(coarse_grain(tt, bins, other), std::invalid_argument);
    CHECK_THROWS_AS(smoothness_profile(tt, bins, hs), std::invalid_argument);

    CHECK(binning_warning(hs, bins, hs.spectrum_center()).has_value());
    const auto big = build_hamiltonian(small(500, 0.4, 0.0));
    CHECK_FALSE(binning_warning(big, bins, 2.25).has_value());
}
