#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "svg.hpp"
#include "tpmwork/errors.hpp"
#include "tpmwork/model.hpp"
#include "tpmwork/propagator.hpp"
#include "tpmwork/sweep.hpp"
#include "tpmwork/theory.hpp"
#include "tpmwork/workstats.hpp"

namespace tpmwork::cli {

namespace fs = std::filesystem;
using sweep::format_double;

namespace {

using Row = std::vector<std::string>;

std::string shortest(double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::vector<Row> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw fs::filesystem_error("cannot read", path, std::make_error_code(std::errc::io_error));
    std::vector<Row> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        Row row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) row.push_back(field);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw fs::filesystem_error("cannot write", path, std::make_error_code(std::errc::io_error));
    return out;
}

int exit_code(const sweep::SweepResult& r) {
    if (r.complete()) return kOk;
    if (r.interrupted) return kPartial;
    for (const auto& f : r.failures) {
        if (f.numerical) return kNumericalError;
    }
    return kPartial;
}

void report(const sweep::SweepResult& r, std::ostream& out) {
    out << "units: " << r.units_total << " total, " << r.units_skipped << " reused, " << r.units_completed
        << " computed, " << r.failures.size() << " failed" << (r.interrupted ? ", interrupted" : "") << "\n";
    for (const auto& f : r.failures) out << "  failed " << f.unit << ": " << f.message << "\n";
    for (const auto& p : r.files) out << "wrote " << p.string() << "\n";
}

std::string series_label(const Row& row) {
    return "xi=" + shortest(std::stod(row[0])) + " alpha=" + shortest(std::stod(row[1])) +
           " lambda=" + shortest(std::stod(row[2]));
}

// Groups rows by their first five columns (xi, alpha, lambda, N, seed) in file order.
std::vector<std::pair<Row, std::vector<Row>>> group_rows(const std::vector<Row>& rows) {
    std::vector<std::pair<Row, std::vector<Row>>> groups;
    for (const auto& row : rows) {
        Row key(row.begin(), row.begin() + 5);
        if (groups.empty() || groups.back().first != key) groups.emplace_back(key, std::vector<Row>{});
        groups.back().second.push_back(row);
    }
    return groups;
}

void plot_heatmap(const fs::path& out, const std::vector<Row>& rows) {
    std::map<double, std::pair<std::set<double>, std::set<double>>> axes;
    std::map<double, std::map<std::pair<double, double>, double>> values;
    for (const auto& r : rows) {
        if (r[7] != "exact") continue;
        const double xi = std::stod(r[0]), a = std::stod(r[1]), l = std::stod(r[2]);
        axes[xi].first.insert(a);
        axes[xi].second.insert(l);
        values[xi][{a, l}] = std::stod(r[6]);
    }
    Heatmap map{.title = "microcanonical Jarzynski deviation", .xlabel = "alpha", .ylabel = "lambda", .zlabel = "D"};
    for (const auto& [xi, ax] : axes) {
        HeatmapPanel p{.title = "xi = " + shortest(xi),
                       .x = {ax.first.begin(), ax.first.end()},
                       .y = {ax.second.begin(), ax.second.end()}};
        for (const double l : p.y) {
            std::vector<double> line;
            for (const double a : p.x) {
                const auto it = values[xi].find({a, l});
                line.push_back(it == values[xi].end() ? std::nan("") : it->second);
            }
            p.z.push_back(std::move(line));
        }
        map.panels.push_back(std::move(p));
    }
    write_heatmap(out / "fig_heatmap", map);
}

void plot_scaling(const fs::path& out, std::ostream& log) {
    const auto rows = read_csv(out / "scaling.csv");
    std::map<std::string, std::pair<Series, Series>> by_xi;
    for (const auto& r : rows) {
        const auto label = series_label(r);
        auto& [spread, mean] = by_xi[label];
        spread.label = mean.label = label;
        const double n = std::stod(r[3]), count = std::stod(r[5]);
        const double m = std::stod(r[6]), s = std::stod(r[7]);
        spread.x.push_back(n);
        spread.y.push_back(s);
        mean.x.push_back(n);
        mean.y.push_back(m);
        mean.yerr.push_back(s / std::sqrt(count));
    }
    LinePlot spread{.title = "spread of eigenstate deviations", .xlabel = "N", .ylabel = "std D_es", .logx = true,
                    .logy = true};
    LinePlot mean{.title = "mean eigenstate deviation", .xlabel = "N", .ylabel = "mean D_es", .logx = true,
                  .hline = 0.0};
    for (auto& [label, s] : by_xi) {
        spread.series.push_back(s.first);
        mean.series.push_back(s.second);
    }
    write_line_plot(out / "fig_scaling_std", spread);
    write_line_plot(out / "fig_scaling_mean", mean);
    for (const auto& r : read_csv(out / "scaling_fit.csv")) {
        log << "xi=" << shortest(std::stod(r[0])) << ": std(D_es) ~ N^" << r[3] << " (stderr " << r[5] << ")\n";
    }
}

void plot_scan(const fs::path& out, const std::string& csv, const std::string& stem, const std::string& title,
               const std::string& ylabel, std::size_t x_col, std::size_t y_col, bool lines,
               std::optional<double> hline) {
    LinePlot plot{.title = title, .xlabel = "E", .ylabel = ylabel, .hline = hline};
    for (const auto& [key, rows] : group_rows(read_csv(out / csv))) {
        Series s{.label = series_label(key), .lines = lines};
        for (const auto& r : rows) {
            s.x.push_back(std::stod(r[x_col]));
            s.y.push_back(std::stod(r[y_col]));
        }
        plot.series.push_back(std::move(s));
    }
    write_line_plot(out / stem, plot);
}

std::pair<double, double> bin_support(const WorkPdf& pdf) {
    const double peak = *std::max_element(pdf.probabilities.begin(), pdf.probabilities.end());
    std::size_t lo = pdf.size(), hi = 0;
    for (std::size_t k = 0; k < pdf.size(); ++k) {
        if (pdf.probabilities[k] > 0.01 * peak) {
            lo = std::min(lo, k);
            hi = std::max(hi, k);
        }
    }
    return {pdf.work(lo), pdf.work(hi)};
}

int run_pdf(const RunConfig& c, bool dry_run, std::ostream& out, std::ostream& err) {
    const std::vector<double> alphas = c.alpha ? *c.alpha : std::vector<double>{0.05, 0.5};
    const double xi = c.model.xi;
    if (dry_run) {
        out << "pdf: " << alphas.size() << " cells (xi=" << shortest(xi) << ", lambda=" << shortest(c.model.lambda)
            << ")\n";
        return kOk;
    }
    fs::create_directories(c.output);
    ModelParams p = c.model;
    p.seed = sweep::cell_seed(c.model.seed, xi);
    const auto bath = bath_energies(p.N, p.beta, p.E_bath_min, p.E_bath_max);
    std::mt19937_64 rng(p.seed);
    const auto h_int = build_interaction(p, bath, rng);
    LinePlot plot{.title = "work distribution at the spectrum center", .xlabel = "W", .ylabel = "P_E(W)"};
    for (const double a : alphas) {
        p.alpha = a;
        const auto hs = assemble_hamiltonian(p, bath, h_int);
        const double e0 = hs.spectrum_center();
        if (const auto w = binning_warning(hs, c.binning, e0)) err << "warning: " << *w << "\n";
        const auto members = window_members(hs, c.binning, e0);
        if (members.empty()) throw std::invalid_argument("empty window at the spectrum center");
        const auto pset = propagate(hs, c.propagator, members);
        const auto cg = coarse_grain(transition_table(pset, hs), c.binning, hs);
        const auto* pdf = cg.pdf_for(c.binning.index(e0));
        const fs::path file = c.output / ("pdf_alpha" + shortest(a) + ".csv");
        auto csv = open_out(file);
        write_work_pdf_csv(csv, *pdf);

        std::vector<std::size_t> order;
        for (std::size_t k = 0; k < pdf->size(); ++k) {
            if (pdf->final_bin(k) != pdf->initial_bin && pdf->probabilities[k] > 0.0) order.push_back(k);
        }
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return pdf->probabilities[x] > pdf->probabilities[y]; });
        out << "alpha=" << shortest(a) << " E0=" << format_double(e0) << " I=" << pdf->initial_bin
            << " members=" << members.size() << " dt_discrepancy=" << format_double(pset.discrepancy) << "\n";
        out << "  dominant nonzero-W bins:";
        for (std::size_t j = 0; j < std::min<std::size_t>(2, order.size()); ++j) {
            out << " W=" << format_double(pdf->work(order[j])) << " (P=" << format_double(pdf->density(order[j]))
                << ")";
        }
        const auto [wlo, whi] = bin_support(*pdf);
        out << "\n  support above 1% of max: [" << format_double(wlo) << ", " << format_double(whi) << "]\n";
        out << "wrote " << file.string() << "\n";

        Series s{.label = "alpha=" + shortest(a)};
        for (std::size_t k = 0; k < pdf->size(); ++k) {
            s.x.push_back(pdf->work(k));
            s.y.push_back(pdf->density(k));
        }
        plot.series.push_back(std::move(s));
    }
    if (c.plots) write_line_plot(c.output / "fig_pdf", plot);
    return kOk;
}

int run_bath_check(const RunConfig& c, bool dry_run, std::ostream& out) {
    if (dry_run) {
        out << "bath-check: 1 cell (N=" << c.model.N << ")\n";
        return kOk;
    }
    fs::create_directories(c.output);
    const auto bath = bath_energies(c.model.N, c.model.beta, c.model.E_bath_min, c.model.E_bath_max);
    const fs::path file = c.output / "bath.csv";
    auto csv = open_out(file);
    write_bath_csv(csv, bath);
    out << "N=" << c.model.N << " beta=" << format_double(c.model.beta) << "\n";
    out << "level-count slope: " << format_double(bath_dos_slope(bath)) << "\n";
    out << "cumulative slope: " << format_double(bath_cumulative_slope(bath)) << "\n";
    out << "wrote " << file.string() << "\n";
    return kOk;
}

constexpr double kJr0Tolerance = 1e-12;

int run_jr0(const RunConfig& c, bool dry_run, std::ostream& out) {
    if (dry_run) {
        out << "jr0-oracle: " << c.jr0_trials << " synthetic ensembles\n";
        return kOk;
    }
    fs::create_directories(c.output);
    std::mt19937_64 rng(c.model.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const fs::path file = c.output / "jr0.csv";
    auto csv = open_out(file);
    csv << "trial,beta,delta,z_ini,z_fin,lhs,rhs,abs_diff\n";
    double worst = 0.0;
    for (std::uint64_t t = 0; t < c.jr0_trials; ++t) {
        const double z_fin = std::exp(0.3 * (u(rng) - 0.5));
        const auto ens = theory::make_consistent_ensemble(c.model.beta, c.binning.delta, 1.0, z_fin, 301, 20, rng);
        const auto r = theory::jr0_check(ens);
        const double diff = std::abs(r.lhs - r.rhs);
        worst = std::max(worst, diff);
        csv << t << ',' << format_double(ens.beta) << ',' << format_double(ens.delta) << ','
            << format_double(ens.z_ini) << ',' << format_double(ens.z_fin) << ',' << format_double(r.lhs) << ','
            << format_double(r.rhs) << ',' << format_double(diff) << '\n';
        out << "trial " << t << ": lhs=" << format_double(r.lhs) << " rhs=" << format_double(r.rhs)
            << " |lhs-rhs|=" << format_double(diff) << "\n";
    }
    out << "max |lhs-rhs| = " << format_double(worst) << (worst < kJr0Tolerance ? " (ok)" : " (FAILED)") << "\n";
    out << "wrote " << file.string() << "\n";
    return worst < kJr0Tolerance ? kOk : kNumericalError;
}

int run_sweep(sweep::Experiment kind, const RunConfig& c, bool dry_run, std::ostream& out, std::ostream& err) {
    const auto spec = make_spec(c, kind);
    spec.validate();
    if (dry_run) {
        out << sweep::to_string(kind) << ": " << spec.cell_count() << " cells";
        if (kind == sweep::Experiment::heatmap) {
            out << " (" << spec.xi.size() << " xi x " << spec.alpha.size() << " alpha x " << spec.lambda.size()
                << " lambda)";
        }
        out << ", " << spec.unit_count() << " units, " << spec.workers << " workers\n";
        return kOk;
    }
    const auto result = sweep::run(spec, [&](const std::string& m) { err << m << "\n" << std::flush; });
    report(result, out);
    if (c.plots) {
        switch (kind) {
            case sweep::Experiment::heatmap:
                plot_heatmap(spec.output, read_csv(spec.output / "heatmap.csv"));
                break;
            case sweep::Experiment::scaling:
                plot_scaling(spec.output, out);
                break;
            case sweep::Experiment::energy_scan:
                plot_scan(spec.output, "energy_scan.csv", "fig_energy_scan", "microcanonical deviation vs energy",
                          "D", 5, 6, true, 0.0);
                break;
            case sweep::Experiment::stiffness:
                plot_scan(spec.output, "stiffness.csv", "fig_stiffness", "probability density of zero work",
                          "P_E(0)", 5, 6, true, std::nullopt);
                plot_scan(spec.output, "stiffness_eigenstates.csv", "fig_stiffness_eigenstates",
                          "zero-work density per eigenstate", "P_E(0)", 6, 7, false, std::nullopt);
                break;
        }
    }
    if (kind == sweep::Experiment::energy_scan) {
        for (const auto& r : read_csv(spec.output / "energy_scan_crossings.csv")) {
            out << series_label(r) << ": sign change at E=" << r[5] << "\n";
        }
    }
    if (kind == sweep::Experiment::stiffness) {
        for (const auto& [key, rows] : group_rows(read_csv(spec.output / "stiffness.csv"))) {
            std::vector<double> e, p0;
            for (const auto& r : rows) {
                e.push_back(std::stod(r[5]));
                p0.push_back(std::stod(r[6]));
            }
            if (e.size() >= 2) {
                out << series_label(key) << ": dP_E(0)/dE = " << format_double(sweep::fit_line(e, p0).slope) << "\n";
            }
        }
    }
    return exit_code(result);
}

}  // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"bath-check", "pdf",        "heatmap",   "scaling",
                                                   "energy-scan", "stiffness", "jr0-oracle"};
    return names;
}

RunConfig resolve_config(const std::optional<fs::path>& file, const Overrides& o) {
    RunConfig c = file ? load_config(*file) : RunConfig{};
    if (const char* env = std::getenv(kWorkersEnv); env && *env) {
        apply_override(c, std::string("workers=") + env);
    }
    for (const auto& a : o.assignments) apply_override(c, a);
    if (o.output) c.output = *o.output;
    if (o.workers) c.workers = *o.workers;
    if (o.no_plots) c.plots = false;
    validate(c);
    return c;
}

int cmd_validate(const fs::path& file, std::ostream& out, std::ostream& err) {
    try {
        out << to_yaml(load_config(file));
        return kOk;
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return kConfigError;
    }
}

int cmd_run(const std::string& experiment, const RunConfig& config, bool dry_run, std::ostream& out,
            std::ostream& err) {
    try {
        if (experiment == "bath-check") return run_bath_check(config, dry_run, out);
        if (experiment == "pdf") return run_pdf(config, dry_run, out, err);
        if (experiment == "jr0-oracle") return run_jr0(config, dry_run, out);
        if (const auto kind = sweep::parse_experiment(experiment)) return run_sweep(*kind, config, dry_run, out, err);
        err << "unknown experiment '" << experiment << "'\n";
        return kConfigError;
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return kConfigError;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << " (residual " << format_double(e.residual()) << ")\n";
        return kNumericalError;
    } catch (const fs::filesystem_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return kIoError;
    } catch (const std::logic_error& e) {
        err << "invalid request: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kIoError;
    }
}

}  // namespace tpmwork::cli
