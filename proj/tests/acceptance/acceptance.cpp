// Acceptance gate: one PASS/FAIL line per criterion. Sweep results persist in
// TPMWORK_ACCEPTANCE_DATA so that a rerun only computes missing cells.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <sys/wait.h>

#include "oracle/brute_force.hpp"
#include "tpmwork/model.hpp"
#include "tpmwork/propagator.hpp"
#include "tpmwork/sweep.hpp"
#include "tpmwork/theory.hpp"
#include "tpmwork/workstats.hpp"

using namespace tpmwork;
namespace fs = std::filesystem;

namespace {

// Thresholds, frozen.
constexpr double kJr0Tolerance = 1e-12;
constexpr double kUndrivenTolerance = 1e-10;
constexpr double kStochasticTolerance = 1e-9;
constexpr double kOracleTolerance = 1e-8;
constexpr double kDosTolerance = 0.01;
constexpr double kPdfWidthFactor = 3.0;
constexpr double kPdfSupportLevel = 0.01;
constexpr double kHeatmapRatio = 0.1;
constexpr double kHeatmapFloor = 0.1;
constexpr double kScalingSlopeMin = -0.65;
constexpr double kScalingSlopeMax = -0.35;
constexpr double kScalingDrift = 2.0;
constexpr double kStiffnessRatio = 0.2;
constexpr double kScanEdgeFactor = 5.0;

using Row = std::vector<std::string>;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

std::vector<Row> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<Row> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        Row r;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) r.push_back(f);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t workers() { return std::max(1u, std::thread::hardware_concurrency()); }

fs::path data_dir() { return fs::path(TPMWORK_ACCEPTANCE_DATA); }

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + TPMWORK_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

sweep::SweepResult run_sweep(sweep::SweepSpec spec, const std::string& name) {
    spec.output = data_dir() / name;
    spec.workers = workers();
    return sweep::run(spec, [](const std::string& m) { std::cerr << "  " << m << "\n"; });
}

std::vector<std::size_t> all_indices(const HamiltonianSet& hs) {
    std::vector<std::size_t> idx(hs.dim());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

// 1. Exactness suite.
Outcome exactness() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    double jr0 = 0.0;
    for (int t = 0; t < 50; ++t) {
        const double beta = u(rng);
        const double z_ini = u(rng);
        const double z_fin = z_ini * std::exp(0.3 * (u(rng) - 1.25));
        const auto ens = theory::make_consistent_ensemble(beta, 0.06, z_ini, z_fin, 301, 20, rng);
        const auto r = theory::jr0_check(ens);
        jr0 = std::max(jr0, std::abs(r.lhs - r.rhs));
    }

    double fe = 0.0, slope = 0.0;
    for (const double z : {0.3, 1.0, 7.5}) {
        for (const double beta : {0.5, 1.0, 2.0}) {
            const auto f = theory::free_energy_identities(z, beta, 1.7);
            fe = std::max(fe, std::abs(f.identity_residual));
            slope = std::max(slope, std::abs(f.entropy_slope - beta));
        }
    }

    ModelParams p;
    p.N = 60;
    p.alpha = 0.4;
    p.lambda = 0.0;
    auto hs = build_hamiltonian(p);
    PropagatorConfig cfg;
    const auto idx = all_indices(hs);
    const auto undriven = transition_table(propagate(hs, cfg, idx), hs);
    const double identity =
        (undriven.probabilities - Eigen::MatrixXd::Identity(hs.dim(), hs.dim())).cwiseAbs().maxCoeff();
    double d_es = 0.0;
    for (const auto& rec : eigenstate_deviations(hs, undriven, 0.0)) d_es = std::max(d_es, std::abs(rec.value));

    p.lambda = 0.25;
    hs = build_hamiltonian(p);
    const auto driven = transition_table(propagate(hs, cfg, idx), hs);
    const double cols = (driven.probabilities.colwise().sum().array() - 1.0).abs().maxCoeff();
    const double rows = (driven.probabilities.rowwise().sum().array() - 1.0).abs().maxCoeff();

    const bool pass = jr0 < kJr0Tolerance && fe < 1e-12 && slope < 1e-9 && d_es < kUndrivenTolerance &&
                      identity < kUndrivenTolerance && cols < kStochasticTolerance && rows < kStochasticTolerance;
    return {pass, "jr0 " + fmt(jr0) + ", free energy " + fmt(fe) + " / slope " + fmt(slope) + ", lambda=0 D_es " +
                      fmt(d_es) + " identity " + fmt(identity) + ", column/row sums " + fmt(cols) + " / " +
                      fmt(rows)};
}

// 2. Small-instance oracle equivalence.
Outcome oracle_equivalence() {
    double worst_h = 0.0, worst_u = 0.0, worst_p = 0.0, worst_mc = 0.0, worst_es = 0.0;
    for (const int n : {2, 4}) {
        ModelParams p;
        p.N = static_cast<std::size_t>(n);
        p.alpha = 0.3;
        p.seed = 11;
        oracle::Model m;
        m.n = n;
        m.alpha = p.alpha;
        m.seed = p.seed;

        const auto bath = bath_energies(p.N, p.beta, p.E_bath_min, p.E_bath_max);
        std::mt19937_64 rng(p.seed);
        worst_h = std::max(worst_h, (build_interaction(p, bath, rng) - oracle::interaction(m)).cwiseAbs().maxCoeff());

        const auto hs = build_hamiltonian(p);
        PropagatorConfig cfg;
        cfg.steps_per_period = 1024;
        const auto ref = oracle::solve(m, 10 * static_cast<int>(step_count(p, cfg.steps_per_period)));
        const auto pset = propagate(hs, cfg, all_indices(hs));
        const Eigen::MatrixXcd q = hs.eigenvectors().cast<std::complex<double>>();
        worst_u = std::max(worst_u, (q * pset.final_states * q.adjoint() - ref.u).cwiseAbs().maxCoeff());
        const auto tt = transition_table(pset, hs);
        worst_p = std::max(worst_p, (tt.probabilities - ref.p).cwiseAbs().maxCoeff());

        const auto prop = make_propagate_fn(hs, cfg);
        for (const double delta : {0.06, 0.7}) {
            EnergyBinning bins{delta};
            const double e0 = hs.eigenvalues()(n);
            const auto mc = d_microcanonical(hs, e0, bins, prop);
            const std::vector<int> members(mc.members.begin(), mc.members.end());
            worst_mc = std::max(worst_mc, std::abs(mc.exact.value - oracle::deviation(m, ref, members, e0)));
        }
        for (std::size_t i = 0; i < hs.dim(); ++i) {
            const auto es = eigenstate_deviations(hs, tt, 0.0)[i];
            const double expect =
                oracle::deviation(m, ref, {static_cast<int>(i)}, ref.eps(static_cast<Eigen::Index>(i)));
            worst_es = std::max(worst_es, std::abs(es.value - expect));
        }
    }
    const double worst = std::max({worst_h, worst_u, worst_p, worst_mc, worst_es});
    return {worst < kOracleTolerance, "max |diff| H_int " + fmt(worst_h) + ", U " + fmt(worst_u) + ", p " +
                                          fmt(worst_p) + ", D_mc " + fmt(worst_mc) + ", D_es " + fmt(worst_es)};
}

// 3. Bath DOS slope.
Outcome bath_dos() {
    bool pass = true;
    std::string detail;
    for (const std::size_t n : {500u, 1000u, 4000u}) {
        const double s = bath_dos_slope(bath_energies(n, 1.0, 0.0, 4.5));
        pass = pass && std::abs(s - 1.0) < kDosTolerance;
        detail += "N=" + std::to_string(n) + " slope " + fmt(s) + "; ";
    }
    return {pass, detail};
}

struct Pdf {
    std::vector<double> w, p;
    long initial = 0;
};

Pdf read_pdf(const fs::path& path) {
    Pdf pdf;
    for (const auto& r : read_csv(path)) {
        pdf.initial = std::stol(r[0]);
        pdf.w.push_back(std::stod(r[2]));
        pdf.p.push_back(std::stod(r[3]));
    }
    return pdf;
}

// 4. Work PDFs at weak and strong coupling.
Outcome work_pdfs() {
    const auto dir = data_dir() / "pdf";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const int code = run_cli("run pdf --no-plots -o \"" + dir.string() + "\"", dir / "log.txt");
    if (code != 0) return {false, "tpmwork run pdf exited with " + std::to_string(code)};
    const auto weak = read_pdf(dir / "pdf_alpha0.05.csv");
    const auto strong = read_pdf(dir / "pdf_alpha0.5.csv");
    const double delta = 0.06;

    // Peaks: local maxima of the density over nonzero work; a peak at +-0.5 may straddle two bins.
    std::vector<std::size_t> peaks;
    for (std::size_t k = 1; k + 1 < weak.p.size(); ++k) {
        if (std::abs(weak.w[k]) < delta / 2) continue;
        if (weak.p[k] > weak.p[k - 1] && weak.p[k] >= weak.p[k + 1]) peaks.push_back(k);
    }
    std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return weak.p[a] > weak.p[b]; });
    bool peaks_ok = peaks.size() >= 2;
    std::string detail = "weak-coupling peaks at W =";
    for (std::size_t j = 0; j < std::min<std::size_t>(2, peaks.size()); ++j) detail += " " + fmt(weak.w[peaks[j]]);
    if (peaks_ok) {
        const double a = weak.w[peaks[0]], b = weak.w[peaks[1]];
        peaks_ok = std::abs(std::min(a, b) + 0.5) <= delta && std::abs(std::max(a, b) - 0.5) <= delta;
    }

    auto width = [](const Pdf& pdf) {
        const double peak = *std::max_element(pdf.p.begin(), pdf.p.end());
        std::size_t count = 0;
        for (const double x : pdf.p) count += x > kPdfSupportLevel * peak ? 1 : 0;
        return static_cast<double>(count);
    };
    const double ratio = width(strong) / width(weak);
    detail += "; support bins weak " + fmt(width(weak)) + ", strong " + fmt(width(strong)) + " (ratio " + fmt(ratio) +
              ", need >= " + fmt(kPdfWidthFactor) + ")";
    return {peaks_ok && ratio >= kPdfWidthFactor, detail};
}

struct HeatmapData {
    std::map<std::tuple<double, double, double>, double> d;  // (xi, alpha, lambda) -> exact D_mc
};

HeatmapData heatmap_data() {
    const auto r = run_sweep(sweep::preset(sweep::Experiment::heatmap), "heatmap");
    if (!r.complete()) throw std::runtime_error("heatmap sweep incomplete");
    HeatmapData h;
    for (const auto& row : read_csv(data_dir() / "heatmap" / "heatmap.csv")) {
        if (row[7] != "exact") continue;
        h.d[{std::stod(row[0]), std::stod(row[1]), std::stod(row[2])}] = std::stod(row[6]);
    }
    return h;
}

// 5. Heatmap properties.
Outcome heatmap(const HeatmapData& h) {
    const double d06 = h.d.at({0.6, 0.4, 0.25}), d1 = h.d.at({1.0, 0.4, 0.25}), d2 = h.d.at({2.0, 0.4, 0.25});
    const double big = std::max(std::abs(d06), std::abs(d2));
    bool pos = false, neg = false;
    for (const auto& [key, v] : h.d) {
        if (std::get<0>(key) == 1.0) continue;
        pos = pos || v > 0.0;
        neg = neg || v < 0.0;
    }
    const bool pass = std::abs(d1) < kHeatmapRatio * big && std::abs(d06) > kHeatmapFloor &&
                      std::abs(d2) > kHeatmapFloor && pos && neg;
    return {pass, "D(0.4, 0.25): xi=0.6 " + fmt(d06) + ", xi=1 " + fmt(d1) + ", xi=2 " + fmt(d2) + " (need |xi=1| < " +
                      fmt(kHeatmapRatio) + " max, floor " + fmt(kHeatmapFloor) + "); both signs off xi=1: " +
                      (pos && neg ? "yes" : "no")};
}

// 6. Finite-size scaling of the eigenstate deviations.
Outcome scaling() {
    const auto r = run_sweep(sweep::preset(sweep::Experiment::scaling), "scaling");
    if (!r.complete()) return {false, "scaling sweep incomplete"};
    bool pass = true;
    std::string detail;
    for (const auto& row : read_csv(data_dir() / "scaling" / "scaling_fit.csv")) {
        const double s = std::stod(row[3]);
        pass = pass && s >= kScalingSlopeMin && s <= kScalingSlopeMax;
        detail += "xi=" + fmt(std::stod(row[0])) + " slope " + fmt(s) + "; ";
    }
    std::map<double, std::vector<std::pair<double, double>>> means;  // xi -> (mean, stderr)
    for (const auto& row : read_csv(data_dir() / "scaling" / "scaling.csv")) {
        const double count = std::stod(row[5]);
        means[std::stod(row[0])].emplace_back(std::stod(row[6]), std::stod(row[7]) / std::sqrt(count));
    }
    for (const auto& [xi, v] : means) {
        double drift = 0.0;
        for (std::size_t a = 0; a < v.size(); ++a) {
            for (std::size_t b = a + 1; b < v.size(); ++b) {
                const double se = std::hypot(v[a].second, v[b].second);
                drift = std::max(drift, std::abs(v[a].first - v[b].first) / se);
            }
        }
        pass = pass && drift < kScalingDrift;
        detail += "xi=" + fmt(xi) + " mean drift " + fmt(drift) + " stderr; ";
    }
    return {pass, detail};
}

// 7. Stiffness: energy dependence of the zero-work density.
Outcome stiffness() {
    const auto r = run_sweep(sweep::preset(sweep::Experiment::stiffness), "stiffness");
    if (!r.complete()) return {false, "stiffness sweep incomplete"};
    std::map<double, std::pair<std::vector<double>, std::vector<double>>> curves;
    for (const auto& row : read_csv(data_dir() / "stiffness" / "stiffness.csv")) {
        auto& c = curves[std::stod(row[0])];
        c.first.push_back(std::stod(row[5]));
        c.second.push_back(std::stod(row[6]));
    }
    std::map<double, double> slope;
    for (const auto& [xi, c] : curves) slope[xi] = sweep::fit_line(c.first, c.second).slope;
    const double s1 = std::abs(slope.at(1.0));
    const bool pass =
        s1 < kStiffnessRatio * std::abs(slope.at(0.6)) && s1 < kStiffnessRatio * std::abs(slope.at(2.0));
    return {pass, "dP_E(0)/dE: xi=0.6 " + fmt(slope.at(0.6)) + ", xi=1 " + fmt(slope.at(1.0)) + ", xi=2 " +
                      fmt(slope.at(2.0)) + " (need |xi=1| < " + fmt(kStiffnessRatio) + " of both)"};
}

// 8. Energy scan.
Outcome energy_scan(const HeatmapData& h) {
    const auto r = run_sweep(sweep::preset(sweep::Experiment::energy_scan), "energy_scan");
    if (!r.complete()) return {false, "energy scan incomplete"};
    std::map<double, std::pair<std::vector<double>, std::vector<double>>> curves;
    for (const auto& row : read_csv(data_dir() / "energy_scan" / "energy_scan.csv")) {
        auto& c = curves[std::stod(row[0])];
        c.first.push_back(std::stod(row[5]));
        c.second.push_back(std::stod(row[6]));
    }
    const auto& [e, d] = curves.at(2.0);
    // The crossing whose bracketing grid values are smallest; its |D| is the larger of the two.
    double at_cross = INFINITY;
    for (std::size_t k = 0; k + 1 < d.size(); ++k) {
        if ((d[k] < 0.0) != (d[k + 1] < 0.0)) at_cross = std::min(at_cross, std::max(std::abs(d[k]), std::abs(d[k + 1])));
    }
    const bool crosses = std::isfinite(at_cross);
    const bool edges = crosses && std::abs(d.front()) >= kScanEdgeFactor * at_cross &&
                       std::abs(d.back()) >= kScanEdgeFactor * at_cross;

    double band = 0.0;
    for (const auto& [key, v] : h.d) {
        if (std::get<0>(key) == 1.0 && std::get<2>(key) > 0.0) band = std::max(band, std::abs(v));
    }
    double scan1 = 0.0;
    for (const double v : curves.at(1.0).second) scan1 = std::max(scan1, std::abs(v));

    return {crosses && edges && scan1 <= band,
            "xi=2: sign change " + std::string(crosses ? "yes" : "no") + ", |D| at crossing " + fmt(at_cross) +
                ", edges " + fmt(d.front()) + " / " + fmt(d.back()) + " (need " + fmt(kScanEdgeFactor) +
                "x); xi=1 max |D| " + fmt(scan1) + " vs heatmap band " + fmt(band)};
}

// 9. Determinism across repeated runs and worker counts.
Outcome determinism() {
    const auto root = data_dir() / "determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    const auto cfg = root / "config.yaml";
    std::ofstream(cfg) << "N: 100\nxi: [0.6, 1, 2]\nalpha: [0.2, 0.4]\nlambda: [0.1, 0.25]\ndelta: 0.2\n"
                          "energies: [2.0, 2.5, 3.0]\nN_list: [60, 80]\neigenstate_count: 10\n";
    const std::vector<std::pair<std::string, std::string>> runs = {{"a", "1"}, {"b", "3"}, {"c", "1"}};
    for (const auto& [name, w] : runs) {
        for (const char* exp : {"heatmap", "energy-scan", "stiffness", "scaling"}) {
            const auto out = root / name;
            const int code = run_cli(std::string("run ") + exp + " --no-plots -c \"" + cfg.string() + "\" -o \"" +
                                         out.string() + "\" --workers " + w,
                                     root / (name + "_" + exp + ".log"));
            if (code != 0) return {false, std::string(exp) + " run exited with " + std::to_string(code)};
        }
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(root / "a")) {
        if (entry.path().extension() != ".csv") continue;
        const auto name = entry.path().filename();
        const auto a = slurp(entry.path());
        if (a != slurp(root / "b" / name) || a != slurp(root / "c" / name)) {
            return {false, name.string() + " differs between runs"};
        }
        ++compared;
    }
    return {compared >= 8, std::to_string(compared) + " CSV files byte-identical across 3 runs (workers 1, 3, 1)"};
}

}  // namespace

int main() {
    fs::create_directories(data_dir());
    int failed = 0;
    auto report = [&](int k, const char* name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", k, name, o.detail.c_str());
        std::fflush(stdout);
    };
    report(1, "exactness suite", exactness);
    report(2, "small-instance oracle equivalence", oracle_equivalence);
    report(3, "bath DOS slope", bath_dos);
    report(4, "work PDFs (weak vs strong coupling)", work_pdfs);

    std::optional<HeatmapData> h;
    std::string heat_error;
    try {
        h = heatmap_data();
    } catch (const std::exception& e) {
        heat_error = e.what();
    }
    report(5, "heatmap of D_mc", [&] {
        if (!h) return Outcome{false, "error: " + heat_error};
        return heatmap(*h);
    });
    report(6, "finite-size scaling of D_es", scaling);
    report(7, "stiffness of P_E(0)", stiffness);
    report(8, "energy scan of D_mc", [&] {
        if (!h) return Outcome{false, "error: " + heat_error};
        return energy_scan(*h);
    });
    report(9, "determinism", determinism);
    std::printf("%d of 9 criteria passed\n", 9 - failed);
    return failed == 0 ? 0 : 1;
}
