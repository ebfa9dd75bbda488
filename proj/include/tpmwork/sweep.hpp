#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tpmwork/params.hpp"
#include "tpmwork/propagator.hpp"
#include "tpmwork/workstats.hpp"

namespace tpmwork::sweep {

enum class Experiment { heatmap, scaling, energy_scan, stiffness };

std::string to_string(Experiment e);
/// Accepts "heatmap", "scaling", "energy-scan" and "stiffness".
std::optional<Experiment> parse_experiment(const std::string& name);

struct SweepSpec {
    Experiment kind = Experiment::heatmap;
    ModelParams base;
    PropagatorConfig propagator;
    EnergyBinning binning;
    std::vector<double> xi;
    std::vector<double> alpha;
    std::vector<double> lambda;
    std::vector<std::size_t> n_list;    ///< scaling only; other experiments use base.N
    std::vector<double> energies;       ///< absolute window energies (energy scan, stiffness)
    std::size_t eigenstate_count = 100; ///< scaling sample size
    std::filesystem::path output = "results";
    std::size_t workers = 1;

    std::vector<std::string> violations() const;
    void validate() const;
    /// Number of independent work units (Hamiltonians to build and propagate).
    std::size_t unit_count() const;
    /// Number of output cells, e.g. |xi| |alpha| |lambda| for the heatmap.
    std::size_t cell_count() const;
};

/// Preset grids: alpha 0..0.5 step 0.05 and lambda 0..0.25 step 0.025 with xi in {0.6, 1, 2}
/// for the heatmap; (xi, 0.4, 0.25) with N in {250, 500, 1000} and 100 central eigenstates
/// for scaling; (2.0 and 1.0, 0.45, 0.15) for the energy scan; (xi, 0.4, 0.25) for the
/// stiffness profile. Energies are 21 points on [1.25, 3.25].
SweepSpec preset(Experiment kind);

/// Disorder seed of a cell: a hash of the base seed, xi and (for scaling) N. The disorder is
/// shared across the alpha and lambda grid.
std::uint64_t cell_seed(std::uint64_t base, double xi, std::optional<std::size_t> n = std::nullopt);

/// Indices of `count` adjacent eigenstates centered on the median index of a 2N spectrum.
std::vector<std::size_t> central_indices(std::size_t dim, std::size_t count);

/// %.17g
std::string format_double(double x);

/// Append-only CSV keyed by a subset of columns, with a JSON sidecar `<file>.meta.json`
/// that pins the inputs. Rows whose key is already present are ignored, so rerunning a
/// completed cell adds nothing. A truncated last line (killed writer) is dropped on open.
/// Thread-safe; one writer at a time.
class ResultStore {
public:
    using Row = std::vector<std::string>;

    /// `meta_json` is a JSON object written to the sidecar together with `inputs_hash`.
    /// Throws ConfigError when an existing store was produced from different inputs.
    ResultStore(std::filesystem::path csv, Row header, std::vector<std::size_t> key_columns,
                const std::string& inputs_hash, const std::string& meta_json);

    const std::filesystem::path& path() const noexcept { return path_; }
    const Row& header() const noexcept { return header_; }
    bool contains(const Row& key) const;
    std::size_t size() const;
    /// Writes the rows not yet present and flushes.
    void append(const std::vector<Row>& rows);
    /// Rewrites the file sorted by key (numerically where both fields parse as numbers).
    void finalize();
    std::vector<Row> rows() const;

private:
    Row key_of(const Row& row) const;

    std::filesystem::path path_;
    Row header_;
    std::vector<std::size_t> key_columns_;
    mutable std::mutex mutex_;
    std::map<Row, Row> rows_;
};

/// Set by a signal handler to stop scheduling new units; completed units stay on disk.
std::atomic<bool>& stop_requested();

struct UnitFailure {
    std::string unit;
    std::string message;
    bool numerical = false;
};

struct SweepResult {
    std::size_t units_total = 0;
    std::size_t units_skipped = 0;    ///< already present in the store
    std::size_t units_completed = 0;  ///< computed in this run
    std::vector<UnitFailure> failures;
    bool interrupted = false;
    std::vector<std::filesystem::path> files;

    bool complete() const noexcept {
        return failures.empty() && !interrupted &&
               units_skipped + units_completed == units_total;
    }
};

using ProgressFn = std::function<void(const std::string&)>;

/// One D_mc per (xi, alpha, lambda) at E0 = spectrum center; both deviation forms.
/// File heatmap.csv: xi,alpha,lambda,N,seed,E0,D,form,dt_discrepancy
SweepResult run_heatmap(const SweepSpec& spec, const ProgressFn& progress = {});

/// D_es of the central eigenstates per (xi, N). Files scaling_states.csv (per state),
/// scaling.csv: xi,alpha,lambda,N,seed,count,mean_D,std_D and scaling_fit.csv with the
/// least-squares line through (ln N, ln std_D).
SweepResult run_scaling(const SweepSpec& spec, const ProgressFn& progress = {});

/// D_mc(E) per (xi, alpha, lambda). Files energy_scan.csv: xi,alpha,lambda,N,seed,E,D and
/// energy_scan_crossings.csv with linearly interpolated sign changes.
SweepResult run_energy_scan(const SweepSpec& spec, const ProgressFn& progress = {});

/// Window P_E(0) per (xi, alpha, lambda). Files stiffness.csv: xi,alpha,lambda,N,seed,E,P0
/// and stiffness_eigenstates.csv with the per-eigenstate variant.
SweepResult run_stiffness(const SweepSpec& spec, const ProgressFn& progress = {});

SweepResult run(const SweepSpec& spec, const ProgressFn& progress = {});

/// Per-(xi, N) summary of eigenstate deviations.
struct ScalingSummary {
    double xi = 0.0, alpha = 0.0, lambda = 0.0;
    std::size_t N = 0;
    std::uint64_t seed = 0;
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;  ///< sample standard deviation
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;  ///< NaN with fewer than three points
    std::size_t points = 0;
};

/// Ordinary least squares. Throws std::invalid_argument with fewer than two distinct x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Sign changes of y(x) by linear interpolation between neighbours.
std::vector<double> zero_crossings(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace tpmwork::sweep
