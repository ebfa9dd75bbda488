#include "tpmwork/sweep.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "tpmwork/errors.hpp"
#include "tpmwork/model.hpp"
#include "tpmwork/version.hpp"

namespace tpmwork::sweep {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Row = ResultStore::Row;

std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::heatmap: return "heatmap";
        case Experiment::scaling: return "scaling";
        case Experiment::energy_scan: return "energy-scan";
        case Experiment::stiffness: return "stiffness";
    }
    return "unknown";
}

std::optional<Experiment> parse_experiment(const std::string& name) {
    for (const auto e : {Experiment::heatmap, Experiment::scaling, Experiment::energy_scan, Experiment::stiffness}) {
        if (to_string(e) == name) return e;
    }
    return std::nullopt;
}

std::vector<std::string> SweepSpec::violations() const {
    std::vector<std::string> out;
    for (auto& v : base.violations()) out.push_back(std::move(v));
    for (auto& v : propagator.violations()) out.push_back(std::move(v));
    if (!(binning.delta > 0.0)) out.emplace_back("delta must be > 0");
    if (xi.empty()) out.emplace_back("xi grid must not be empty");
    if (alpha.empty()) out.emplace_back("alpha grid must not be empty");
    if (lambda.empty()) out.emplace_back("lambda grid must not be empty");
    auto finite = [&](const std::vector<double>& g, const char* name) {
        for (const double x : g) {
            if (!std::isfinite(x)) {
                out.push_back(std::string(name) + " grid holds a non-finite value");
                return;
            }
        }
    };
    finite(xi, "xi");
    finite(alpha, "alpha");
    finite(lambda, "lambda");
    finite(energies, "energy");
    if (kind == Experiment::scaling) {
        if (n_list.empty()) out.emplace_back("N list must not be empty");
        for (const auto n : n_list) {
            if (n < 2) out.emplace_back("every N must be >= 2");
            if (2 * n < eigenstate_count) out.emplace_back("eigenstate_count exceeds the spectrum size 2N");
        }
        if (eigenstate_count < 2) out.emplace_back("eigenstate_count must be >= 2 (the standard deviation needs two states)");
    }
    if ((kind == Experiment::energy_scan || kind == Experiment::stiffness) && energies.empty()) {
        out.emplace_back("energy list must not be empty");
    }
    if (workers < 1) out.emplace_back("workers must be >= 1");
    return out;
}

void SweepSpec::validate() const {
    auto v = violations();
    if (v.empty()) return;
    std::ostringstream msg;
    msg << "invalid " << to_string(kind) << " specification:";
    for (const auto& s : v) msg << "\n  - " << s;
    throw ConfigError(msg.str(), std::move(v));
}

std::size_t SweepSpec::unit_count() const {
    const std::size_t ns = kind == Experiment::scaling ? n_list.size() : 1;
    return xi.size() * alpha.size() * ns;
}

std::size_t SweepSpec::cell_count() const {
    const std::size_t base_cells = xi.size() * alpha.size() * lambda.size();
    switch (kind) {
        case Experiment::heatmap: return base_cells;
        case Experiment::scaling: return base_cells * n_list.size();
        case Experiment::energy_scan:
        case Experiment::stiffness: return base_cells * energies.size();
    }
    return base_cells;
}

namespace {

std::vector<double> grid(double lo, double step, int count) {
    std::vector<double> g;
    for (int k = 0; k < count; ++k) g.push_back(std::round((lo + step * k) * 1e6) / 1e6);
    return g;
}

}  // namespace

SweepSpec preset(Experiment kind) {
    SweepSpec s;
    s.kind = kind;
    s.energies = grid(1.25, 0.1, 21);
    switch (kind) {
        case Experiment::heatmap:
            s.xi = {0.6, 1.0, 2.0};
            s.alpha = grid(0.0, 0.05, 11);
            s.lambda = grid(0.0, 0.025, 11);
            break;
        case Experiment::scaling:
            s.xi = {0.6, 1.0, 2.0};
            s.alpha = {0.4};
            s.lambda = {0.25};
            s.n_list = {250, 500, 1000};
            break;
        case Experiment::energy_scan:
            s.xi = {1.0, 2.0};
            s.alpha = {0.45};
            s.lambda = {0.15};
            break;
        case Experiment::stiffness:
            s.xi = {0.6, 1.0, 2.0};
            s.alpha = {0.4};
            s.lambda = {0.25};
            break;
    }
    return s;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t base, double xi, std::optional<std::size_t> n) {
    std::uint64_t s = splitmix(base);
    s = splitmix(s ^ std::bit_cast<std::uint64_t>(xi == 0.0 ? 0.0 : xi));
    if (n) s = splitmix(s ^ static_cast<std::uint64_t>(*n));
    return s;
}

std::vector<std::size_t> central_indices(std::size_t dim, std::size_t count) {
    if (count > dim) throw std::invalid_argument("central_indices: count exceeds dimension");
    const std::size_t first = dim / 2 - std::min(dim / 2, count / 2);
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), first);
    return idx;
}

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------------------------------
// ResultStore

namespace {

Row split_csv(const std::string& line) {
    Row out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string join_csv(const Row& row) {
    std::string s;
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (k) s += ',';
        s += row[k];
    }
    return s;
}

std::optional<double> as_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

bool key_less(const Row& a, const Row& b) {
    for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
        const auto x = as_number(a[k]);
        const auto y = as_number(b[k]);
        if (x && y) {
            if (*x != *y) return *x < *y;
        } else if (a[k] != b[k]) {
            return a[k] < b[k];
        }
    }
    return a.size() < b.size();
}

}  // namespace

ResultStore::ResultStore(fs::path csv, Row header, std::vector<std::size_t> key_columns,
                         const std::string& inputs_hash, const std::string& meta_json)
    : path_(std::move(csv)), header_(std::move(header)), key_columns_(std::move(key_columns)) {
    fs::path meta = path_;
    meta += ".meta.json";
    const bool exists = fs::exists(path_);
    if (exists && fs::exists(meta)) {
        std::ifstream in(meta);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError("unreadable store metadata " + meta.string() + ": " + e.what());
        }
        if (j.value("inputs_hash", std::string()) != inputs_hash) {
            throw ConfigError("result store " + path_.string() +
                              " was produced from different inputs; choose another output directory or remove it");
        }
    }
    if (exists) {
        std::ifstream in(path_);
        std::string line;
        std::getline(in, line);
        if (split_csv(line) != header_) {
            throw ConfigError("result store " + path_.string() + " has an unexpected header");
        }
        while (std::getline(in, line)) {
            if (in.eof() && !line.empty()) break;  // unterminated last line
            auto row = split_csv(line);
            if (row.size() != header_.size()) continue;
            auto key = key_of(row);
            rows_.emplace(std::move(key), std::move(row));
        }
    }
    fs::create_directories(path_.parent_path().empty() ? fs::path(".") : path_.parent_path());
    {
        json j = json::parse(meta_json);
        j["inputs_hash"] = inputs_hash;
        std::ofstream out(meta, std::ios::trunc);
        out << j.dump(2) << '\n';
    }
    finalize();  // drops any truncated tail and writes the header for a new store
}

Row ResultStore::key_of(const Row& row) const {
    Row key;
    key.reserve(key_columns_.size());
    for (const auto c : key_columns_) key.push_back(row.at(c));
    return key;
}

bool ResultStore::contains(const Row& key) const {
    std::lock_guard lock(mutex_);
    return rows_.count(key) > 0;
}

std::size_t ResultStore::size() const {
    std::lock_guard lock(mutex_);
    return rows_.size();
}

void ResultStore::append(const std::vector<Row>& rows) {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    for (const auto& row : rows) {
        if (row.size() != header_.size()) throw std::invalid_argument("ResultStore: row width mismatch");
        auto key = key_of(row);
        if (rows_.count(key)) continue;
        out << join_csv(row) << '\n';
        rows_.emplace(std::move(key), row);
    }
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + path_.string());
}

std::vector<Row> ResultStore::rows() const {
    std::lock_guard lock(mutex_);
    std::vector<Row> out;
    out.reserve(rows_.size());
    for (const auto& [key, row] : rows_) out.push_back(row);
    std::stable_sort(out.begin(), out.end(), [this](const Row& a, const Row& b) { return key_less(key_of(a), key_of(b)); });
    return out;
}

void ResultStore::finalize() {
    const auto sorted = rows();
    std::lock_guard lock(mutex_);
    fs::path tmp = path_;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << join_csv(header_) << '\n';
        for (const auto& row : sorted) out << join_csv(row) << '\n';
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path_);
}

std::atomic<bool>& stop_requested() {
    static std::atomic<bool> flag{false};
    return flag;
}

// ---------------------------------------------------------------------------------------
// Sweeps

namespace {

struct Unit {
    double xi = 0.0;
    double alpha = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;

    std::string label() const {
        std::ostringstream s;
        s << "xi=" << xi << " alpha=" << alpha << " N=" << n;
        return s.str();
    }
};

std::vector<Unit> make_units(const SweepSpec& spec) {
    std::vector<Unit> units;
    const bool scaling = spec.kind == Experiment::scaling;
    const std::vector<std::size_t> ns = scaling ? spec.n_list : std::vector<std::size_t>{spec.base.N};
    for (const double xi : spec.xi) {
        for (const auto n : ns) {
            const auto seed = cell_seed(spec.base.seed, xi, scaling ? std::optional<std::size_t>(n) : std::nullopt);
            for (const double a : spec.alpha) units.push_back(Unit{xi, a, n, seed});
        }
    }
    return units;
}

std::string scheme_name(Scheme s) { return s == Scheme::strang2 ? "strang2" : "suzuki4"; }

json inputs_json(const SweepSpec& spec) {
    const auto& p = spec.base;
    json j;
    j["experiment"] = to_string(spec.kind);
    j["version"] = kVersion;
    j["model"] = {{"B_z", p.B_z},           {"beta", p.beta},           {"E_bath_min", p.E_bath_min},
                  {"E_bath_max", p.E_bath_max}, {"sigma_int_sq", p.sigma_int_sq}, {"omega_prot", p.omega_prot},
                  {"n_periods", p.n_periods}, {"seed", p.seed}};
    if (spec.kind != Experiment::scaling) j["model"]["N"] = p.N;
    j["propagator"] = {{"scheme", scheme_name(spec.propagator.scheme)},
                       {"steps_per_period", spec.propagator.steps_per_period},
                       {"richardson_check", spec.propagator.richardson_check},
                       {"tolerance", spec.propagator.tolerance}};
    j["delta"] = spec.binning.delta;
    if (spec.kind == Experiment::scaling) j["eigenstate_count"] = spec.eigenstate_count;
    return j;
}

std::string inputs_hash(const SweepSpec& spec) { return fnv1a_hex(inputs_json(spec).dump()); }

std::string meta_json(const SweepSpec& spec) {
    json j;
    j["tool"] = "tpmwork";
    j["inputs"] = inputs_json(spec);
    return j.dump(2);
}

ResultStore open_store(const SweepSpec& spec, const std::string& name, Row header, std::vector<std::size_t> keys) {
    return ResultStore(spec.output / (name + ".csv"), std::move(header), std::move(keys), inputs_hash(spec),
                       meta_json(spec));
}

HamiltonianSet unit_hamiltonian(const SweepSpec& spec, const Unit& u) {
    ModelParams p = spec.base;
    p.xi = u.xi;
    p.alpha = u.alpha;
    p.N = u.n;
    p.seed = u.seed;
    p.lambda = spec.lambda.front();
    const auto bath = bath_energies(p.N, p.beta, p.E_bath_min, p.E_bath_max);
    std::mt19937_64 rng(p.seed);
    const auto h_int = build_interaction(p, bath, rng);
    return assemble_hamiltonian(p, bath, h_int);
}

Row row_prefix(const Unit& u, double lambda) {
    return {format_double(u.xi), format_double(u.alpha), format_double(lambda), std::to_string(u.n),
            std::to_string(u.seed)};
}

// Union of the windows of all energies; throws when a window is empty or off the spectrum.
std::vector<std::size_t> window_union(const HamiltonianSet& hs, const EnergyBinning& bins,
                                      const std::vector<double>& energies) {
    const auto& eps = hs.eigenvalues();
    std::set<std::size_t> all;
    for (const double e : energies) {
        const auto members = window_members(hs, bins, e);
        if (members.empty() || e < eps(0) || e > eps(eps.size() - 1)) {
            std::ostringstream msg;
            msg << "energy window at E = " << e << " falls off the spectrum [" << eps(0) << ", "
                << eps(eps.size() - 1) << "] or holds no eigenstate";
            throw std::invalid_argument(msg.str());
        }
        all.insert(members.begin(), members.end());
    }
    return {all.begin(), all.end()};
}

// Runs `work` for every unit not yet complete, on `spec.workers` threads.
SweepResult execute(const SweepSpec& spec, const std::vector<Unit>& units,
                    const std::function<bool(const Unit&)>& done,
                    const std::function<void(const Unit&)>& work, const ProgressFn& progress) {
    SweepResult result;
    result.units_total = units.size();
    std::vector<Unit> pending;
    for (const auto& u : units) {
        if (done(u)) {
            ++result.units_skipped;
        } else {
            pending.push_back(u);
        }
    }
    std::atomic<std::size_t> next{0};
    std::mutex mutex;
    auto report = [&](const std::string& s) {
        if (progress) progress(s);
    };
    report(to_string(spec.kind) + ": " + std::to_string(pending.size()) + " of " + std::to_string(units.size()) +
           " units to compute");

    auto worker = [&] {
        for (;;) {
            if (stop_requested().load()) return;
            const std::size_t k = next.fetch_add(1);
            if (k >= pending.size()) return;
            const auto& u = pending[k];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                work(u);
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                std::lock_guard lock(mutex);
                ++result.units_completed;
                std::ostringstream msg;
                msg << to_string(spec.kind) << ": " << u.label() << " done in " << secs << " s ("
                    << result.units_completed + result.units_skipped << "/" << units.size() << ")";
                report(msg.str());
            } catch (const NumericalError& e) {
                std::lock_guard lock(mutex);
                result.failures.push_back({u.label(), e.what(), true});
                report(to_string(spec.kind) + ": " + u.label() + " failed: " + e.what());
            } catch (const std::exception& e) {
                std::lock_guard lock(mutex);
                result.failures.push_back({u.label(), e.what(), false});
                report(to_string(spec.kind) + ": " + u.label() + " failed: " + e.what());
            }
        }
    };
    const std::size_t n = std::min<std::size_t>(spec.workers, std::max<std::size_t>(pending.size(), 1));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    result.interrupted = stop_requested().load() && result.units_completed + result.units_skipped +
                                                            result.failures.size() < units.size();
    std::sort(result.failures.begin(), result.failures.end(),
              [](const UnitFailure& a, const UnitFailure& b) { return a.unit < b.unit; });
    return result;
}

void write_failures(const SweepSpec& spec, const std::string& name, const SweepResult& r) {
    const fs::path path = spec.output / (name + ".failures.csv");
    if (r.failures.empty()) {
        fs::remove(path);
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    out << "unit,kind,message\n";
    for (const auto& f : r.failures) {
        std::string msg = f.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out << f.unit << ',' << (f.numerical ? "numerical" : "error") << ',' << msg << '\n';
    }
}

void write_rows(const fs::path& path, const Row& header, const std::vector<Row>& rows) {
    std::ofstream out(path, std::ios::trunc);
    out << join_csv(header) << '\n';
    for (const auto& r : rows) out << join_csv(r) << '\n';
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

SweepResult run_heatmap(const SweepSpec& spec, const ProgressFn& progress) {
    spec.validate();
    fs::create_directories(spec.output);
    auto store = open_store(spec, "heatmap", {"xi", "alpha", "lambda", "N", "seed", "E0", "D", "form", "dt_discrepancy"},
                            {0, 1, 2, 3, 4, 7});
    const auto units = make_units(spec);
    auto done = [&](const Unit& u) {
        for (const double l : spec.lambda) {
            for (const char* form : {"exact", "binned"}) {
                auto key = row_prefix(u, l);
                key.emplace_back(form);
                if (!store.contains(key)) return false;
            }
        }
        return true;
    };
    auto work = [&](const Unit& u) {
        const auto hs = unit_hamiltonian(spec, u);
        const double e0 = hs.spectrum_center();
        const auto members = window_members(hs, spec.binning, e0);
        if (members.empty()) throw std::invalid_argument("empty window at the spectrum center");
        const auto sets = propagate_batch(hs, spec.propagator, members, spec.lambda);
        std::vector<Row> rows;
        for (std::size_t b = 0; b < spec.lambda.size(); ++b) {
            const auto mc = microcanonical_from_table(hs, e0, spec.binning, transition_table(sets[b], hs),
                                                      sets[b].discrepancy);
            for (const auto* rec : {&mc.exact, &mc.binned}) {
                auto row = row_prefix(u, spec.lambda[b]);
                row.push_back(format_double(e0));
                row.push_back(format_double(rec->value));
                row.push_back(to_string(rec->form));
                row.push_back(format_double(rec->dt_discrepancy));
                rows.push_back(std::move(row));
            }
        }
        store.append(rows);
    };
    auto result = execute(spec, units, done, work, progress);
    store.finalize();
    write_failures(spec, "heatmap", result);
    result.files = {store.path()};
    return result;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need at least two points");
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.points = x.size();
    if (x.size() > 2) {
        double ss = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double r = y[k] - f.intercept - f.slope * x[k];
            ss += r * r;
        }
        f.slope_stderr = std::sqrt(ss / (n - 2.0) / sxx);
    } else {
        f.slope_stderr = std::numeric_limits<double>::quiet_NaN();
    }
    return f;
}

std::vector<double> zero_crossings(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < x.size() && k + 1 < y.size(); ++k) {
        if (y[k] == 0.0) {
            out.push_back(x[k]);
        } else if (y[k] * y[k + 1] < 0.0) {
            out.push_back(x[k] - y[k] * (x[k + 1] - x[k]) / (y[k + 1] - y[k]));
        }
    }
    if (!y.empty() && y.back() == 0.0 && x.size() == y.size()) out.push_back(x.back());
    return out;
}

SweepResult run_scaling(const SweepSpec& spec, const ProgressFn& progress) {
    spec.validate();
    fs::create_directories(spec.output);
    auto store = open_store(spec, "scaling_states", {"xi", "alpha", "lambda", "N", "seed", "index", "E", "D"},
                            {0, 1, 2, 3, 4, 5});
    const auto units = make_units(spec);
    auto done = [&](const Unit& u) {
        for (const double l : spec.lambda) {
            for (const auto i : central_indices(2 * u.n, spec.eigenstate_count)) {
                auto key = row_prefix(u, l);
                key.push_back(std::to_string(i));
                if (!store.contains(key)) return false;
            }
        }
        return true;
    };
    auto work = [&](const Unit& u) {
        const auto hs = unit_hamiltonian(spec, u);
        const auto idx = central_indices(hs.dim(), spec.eigenstate_count);
        const auto sets = propagate_batch(hs, spec.propagator, idx, spec.lambda);
        std::vector<Row> rows;
        for (std::size_t b = 0; b < spec.lambda.size(); ++b) {
            for (const auto& r : eigenstate_deviations(hs, transition_table(sets[b], hs), sets[b].discrepancy)) {
                auto row = row_prefix(u, spec.lambda[b]);
                row.push_back(std::to_string(*r.eigen_index));
                row.push_back(format_double(r.energy));
                row.push_back(format_double(r.value));
                rows.push_back(std::move(row));
            }
        }
        store.append(rows);
    };
    auto result = execute(spec, units, done, work, progress);
    store.finalize();
    write_failures(spec, "scaling", result);

    // Summaries per (xi, alpha, lambda, N, seed) and fits per (xi, alpha, lambda).
    std::map<Row, std::vector<double>, decltype(&key_less)> groups(&key_less);
    for (const auto& row : store.rows()) {
        groups[Row(row.begin(), row.begin() + 5)].push_back(std::stod(row[7]));
    }
    std::vector<Row> summary;
    std::map<Row, std::pair<std::vector<double>, std::vector<double>>, decltype(&key_less)> fits(&key_less);
    for (const auto& [key, d] : groups) {
        const auto n = static_cast<double>(d.size());
        const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
        double ss = 0.0;
        for (const double x : d) ss += (x - mean) * (x - mean);
        const double sd = d.size() > 1 ? std::sqrt(ss / (n - 1.0)) : std::numeric_limits<double>::quiet_NaN();
        auto row = key;
        row.push_back(std::to_string(d.size()));
        row.push_back(format_double(mean));
        row.push_back(format_double(sd));
        summary.push_back(row);
        if (sd > 0.0) {
            auto& f = fits[Row(key.begin(), key.begin() + 3)];
            f.first.push_back(std::log(std::stod(key[3])));
            f.second.push_back(std::log(sd));
        }
    }
    const fs::path summary_path = spec.output / "scaling.csv";
    write_rows(summary_path, {"xi", "alpha", "lambda", "N", "seed", "count", "mean_D", "std_D"}, summary);
    std::vector<Row> fit_rows;
    for (const auto& [key, xy] : fits) {
        if (xy.first.size() < 2) continue;
        const auto f = fit_line(xy.first, xy.second);
        auto row = key;
        row.push_back(format_double(f.slope));
        row.push_back(format_double(f.intercept));
        row.push_back(format_double(f.slope_stderr));
        row.push_back(std::to_string(f.points));
        fit_rows.push_back(std::move(row));
    }
    const fs::path fit_path = spec.output / "scaling_fit.csv";
    write_rows(fit_path, {"xi", "alpha", "lambda", "slope", "intercept", "slope_stderr", "points"}, fit_rows);
    result.files = {summary_path, fit_path, store.path()};
    return result;
}

SweepResult run_energy_scan(const SweepSpec& spec, const ProgressFn& progress) {
    spec.validate();
    fs::create_directories(spec.output);
    auto store = open_store(spec, "energy_scan", {"xi", "alpha", "lambda", "N", "seed", "E", "D"}, {0, 1, 2, 3, 4, 5});
    const auto units = make_units(spec);
    auto done = [&](const Unit& u) {
        for (const double l : spec.lambda) {
            for (const double e : spec.energies) {
                auto key = row_prefix(u, l);
                key.push_back(format_double(e));
                if (!store.contains(key)) return false;
            }
        }
        return true;
    };
    auto work = [&](const Unit& u) {
        const auto hs = unit_hamiltonian(spec, u);
        const auto idx = window_union(hs, spec.binning, spec.energies);
        const auto sets = propagate_batch(hs, spec.propagator, idx, spec.lambda);
        std::vector<Row> rows;
        for (std::size_t b = 0; b < spec.lambda.size(); ++b) {
            const auto tt = transition_table(sets[b], hs);
            for (const double e : spec.energies) {
                const auto mc = microcanonical_from_table(hs, e, spec.binning, tt, sets[b].discrepancy);
                auto row = row_prefix(u, spec.lambda[b]);
                row.push_back(format_double(e));
                row.push_back(format_double(mc.exact.value));
                rows.push_back(std::move(row));
            }
        }
        store.append(rows);
    };
    auto result = execute(spec, units, done, work, progress);
    store.finalize();
    write_failures(spec, "energy_scan", result);

    std::map<Row, std::pair<std::vector<double>, std::vector<double>>, decltype(&key_less)> curves(&key_less);
    for (const auto& row : store.rows()) {
        auto& c = curves[Row(row.begin(), row.begin() + 5)];
        c.first.push_back(std::stod(row[5]));
        c.second.push_back(std::stod(row[6]));
    }
    std::vector<Row> crossings;
    for (const auto& [key, c] : curves) {
        for (const double x : zero_crossings(c.first, c.second)) {
            auto row = key;
            row.push_back(format_double(x));
            crossings.push_back(std::move(row));
        }
    }
    const fs::path cross_path = spec.output / "energy_scan_crossings.csv";
    write_rows(cross_path, {"xi", "alpha", "lambda", "N", "seed", "E_cross"}, crossings);
    result.files = {store.path(), cross_path};
    return result;
}

SweepResult run_stiffness(const SweepSpec& spec, const ProgressFn& progress) {
    spec.validate();
    fs::create_directories(spec.output);
    auto states = open_store(spec, "stiffness_eigenstates", {"xi", "alpha", "lambda", "N", "seed", "index", "E", "P0"},
                             {0, 1, 2, 3, 4, 5});
    auto store = open_store(spec, "stiffness", {"xi", "alpha", "lambda", "N", "seed", "E", "P0"}, {0, 1, 2, 3, 4, 5});
    const auto units = make_units(spec);
    auto done = [&](const Unit& u) {
        for (const double l : spec.lambda) {
            for (const double e : spec.energies) {
                auto key = row_prefix(u, l);
                key.push_back(format_double(e));
                if (!store.contains(key)) return false;
            }
        }
        return true;
    };
    auto work = [&](const Unit& u) {
        const auto hs = unit_hamiltonian(spec, u);
        const auto idx = window_union(hs, spec.binning, spec.energies);
        const auto sets = propagate_batch(hs, spec.propagator, idx, spec.lambda);
        std::vector<Row> window_rows, state_rows;
        for (std::size_t b = 0; b < spec.lambda.size(); ++b) {
            const auto prof = stiffness_from_table(hs, spec.binning, spec.energies, transition_table(sets[b], hs));
            for (const auto& pt : prof.windows) {
                auto row = row_prefix(u, spec.lambda[b]);
                row.push_back(format_double(pt.energy));
                row.push_back(format_double(pt.p0));
                window_rows.push_back(std::move(row));
            }
            for (const auto& pt : prof.eigenstates) {
                auto row = row_prefix(u, spec.lambda[b]);
                row.push_back(std::to_string(*pt.eigen_index));
                row.push_back(format_double(pt.energy));
                row.push_back(format_double(pt.p0));
                state_rows.push_back(std::move(row));
            }
        }
        states.append(state_rows);  // before the window rows, which mark the unit complete
        store.append(window_rows);
    };
    auto result = execute(spec, units, done, work, progress);
    states.finalize();
    store.finalize();
    write_failures(spec, "stiffness", result);
    result.files = {store.path(), states.path()};
    return result;
}

SweepResult run(const SweepSpec& spec, const ProgressFn& progress) {
    switch (spec.kind) {
        case Experiment::heatmap: return run_heatmap(spec, progress);
        case Experiment::scaling: return run_scaling(spec, progress);
        case Experiment::energy_scan: return run_energy_scan(spec, progress);
        case Experiment::stiffness: return run_stiffness(spec, progress);
    }
    throw std::invalid_argument("run: unknown experiment");
}

}  // namespace tpmwork::sweep
