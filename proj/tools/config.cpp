#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "tpmwork/errors.hpp"

namespace tpmwork::cli {

namespace {

using Setter = std::function<void(RunConfig&, const YAML::Node&)>;

std::string where(const YAML::Mark& m) {
    if (m.is_null()) return "";
    return "line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ": ";
}

struct TypeError {
    std::string message;
};

double as_real(const YAML::Node& n, const std::string& key) {
    try {
        if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
        return n.as<double>();
    } catch (const YAML::BadConversion&) {
        throw TypeError{where(n.Mark()) + "'" + key + "' expects a number"};
    }
}

long long as_integer(const YAML::Node& n, const std::string& key) {
    try {
        if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
        return n.as<long long>();
    } catch (const YAML::BadConversion&) {
        throw TypeError{where(n.Mark()) + "'" + key + "' expects an integer"};
    }
}

std::vector<double> as_reals(const YAML::Node& n, const std::string& key) {
    if (n.IsSequence()) {
        std::vector<double> out;
        for (const auto& x : n) out.push_back(as_real(x, key));
        return out;
    }
    return {as_real(n, key)};
}

std::size_t as_count(const YAML::Node& n, const std::string& key, std::vector<std::string>* range_errors) {
    const long long v = as_integer(n, key);
    if (v < 0) {
        if (range_errors) range_errors->push_back(key + " must be nonnegative");
        return 0;
    }
    return static_cast<std::size_t>(v);
}

// Range problems found while converting (negative counts) are reported with the domain checks.
thread_local std::vector<std::string>* g_range_errors = nullptr;

const std::vector<std::pair<std::string, Setter>>& setters() {
    static const std::vector<std::pair<std::string, Setter>> table = {
        {"N", [](RunConfig& c, const YAML::Node& n) { c.model.N = as_count(n, "N", g_range_errors); }},
        {"N_list", [](RunConfig& c, const YAML::Node& n) {
             std::vector<std::size_t> v;
             if (n.IsSequence()) {
                 for (const auto& x : n) v.push_back(as_count(x, "N_list", g_range_errors));
             } else {
                 v.push_back(as_count(n, "N_list", g_range_errors));
             }
             c.n_list = v;
         }},
        {"B_z", [](RunConfig& c, const YAML::Node& n) { c.model.B_z = as_real(n, "B_z"); }},
        {"beta", [](RunConfig& c, const YAML::Node& n) { c.model.beta = as_real(n, "beta"); }},
        {"E_bath_min", [](RunConfig& c, const YAML::Node& n) { c.model.E_bath_min = as_real(n, "E_bath_min"); }},
        {"E_bath_max", [](RunConfig& c, const YAML::Node& n) { c.model.E_bath_max = as_real(n, "E_bath_max"); }},
        {"sigma_int_sq", [](RunConfig& c, const YAML::Node& n) { c.model.sigma_int_sq = as_real(n, "sigma_int_sq"); }},
        {"xi", [](RunConfig& c, const YAML::Node& n) {
             c.xi = as_reals(n, "xi");
             if (!c.xi->empty()) c.model.xi = c.xi->front();
         }},
        {"alpha", [](RunConfig& c, const YAML::Node& n) {
             c.alpha = as_reals(n, "alpha");
             if (!c.alpha->empty()) c.model.alpha = c.alpha->front();
         }},
        {"lambda", [](RunConfig& c, const YAML::Node& n) {
             c.lambda = as_reals(n, "lambda");
             if (!c.lambda->empty()) c.model.lambda = c.lambda->front();
         }},
        {"omega_prot", [](RunConfig& c, const YAML::Node& n) { c.model.omega_prot = as_real(n, "omega_prot"); }},
        {"n_periods", [](RunConfig& c, const YAML::Node& n) { c.model.n_periods = as_real(n, "n_periods"); }},
        {"seed", [](RunConfig& c, const YAML::Node& n) {
             c.model.seed = static_cast<std::uint64_t>(as_count(n, "seed", g_range_errors));
         }},
        {"scheme", [](RunConfig& c, const YAML::Node& n) {
             const auto s = n.IsScalar() ? n.Scalar() : std::string();
             if (s == "strang2") {
                 c.propagator.scheme = Scheme::strang2;
             } else if (s == "suzuki4") {
                 c.propagator.scheme = Scheme::suzuki4;
             } else {
                 throw TypeError{where(n.Mark()) + "'scheme' must be strang2 or suzuki4"};
             }
         }},
        {"steps_per_period", [](RunConfig& c, const YAML::Node& n) {
             c.propagator.steps_per_period = as_count(n, "steps_per_period", g_range_errors);
         }},
        {"richardson_check", [](RunConfig& c, const YAML::Node& n) {
             try {
                 c.propagator.richardson_check = n.as<bool>();
             } catch (const YAML::BadConversion&) {
                 throw TypeError{where(n.Mark()) + "'richardson_check' expects true or false"};
             }
         }},
        {"tolerance", [](RunConfig& c, const YAML::Node& n) { c.propagator.tolerance = as_real(n, "tolerance"); }},
        {"delta", [](RunConfig& c, const YAML::Node& n) { c.binning.delta = as_real(n, "delta"); }},
        {"energies", [](RunConfig& c, const YAML::Node& n) { c.energies = as_reals(n, "energies"); }},
        {"eigenstate_count", [](RunConfig& c, const YAML::Node& n) {
             c.eigenstate_count = as_count(n, "eigenstate_count", g_range_errors);
         }},
        {"output", [](RunConfig& c, const YAML::Node& n) {
             if (!n.IsScalar()) throw TypeError{where(n.Mark()) + "'output' expects a path"};
             c.output = n.Scalar();
         }},
        {"workers", [](RunConfig& c, const YAML::Node& n) { c.workers = as_count(n, "workers", g_range_errors); }},
        {"plots", [](RunConfig& c, const YAML::Node& n) {
             try {
                 c.plots = n.as<bool>();
             } catch (const YAML::BadConversion&) {
                 throw TypeError{where(n.Mark()) + "'plots' expects true or false"};
             }
         }},
        {"jr0_trials", [](RunConfig& c, const YAML::Node& n) {
             c.jr0_trials = static_cast<std::uint64_t>(as_count(n, "jr0_trials", g_range_errors));
         }},
    };
    return table;
}

const Setter* find_setter(const std::string& key) {
    for (const auto& [k, s] : setters()) {
        if (k == key) return &s;
    }
    return nullptr;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (std::tolower(a[i - 1]) == std::tolower(b[j - 1]) ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string unknown_message(const std::string& key, const YAML::Mark& mark) {
    std::string msg = where(mark) + "unknown key '" + key + "'";
    if (const auto s = suggest_key(key)) msg += " (did you mean '" + *s + "'?)";
    return msg;
}

std::string fmt(double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

}  // namespace

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, s] : setters()) k.push_back(name);
        return k;
    }();
    return keys;
}

std::optional<std::string> suggest_key(const std::string& unknown) {
    const auto u = lower(unknown);
    std::optional<std::string> best;
    for (const auto& k : known_keys()) {
        const auto lk = lower(k);
        if (!u.empty() && (lk.starts_with(u) || lk.find(u) != std::string::npos || u.starts_with(lk))) {
            if (!best || k.size() < best->size()) best = k;
        }
    }
    if (best) return best;
    std::size_t best_d = 4;
    for (const auto& k : known_keys()) {
        const auto d = edit_distance(unknown, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

std::vector<std::string> RunConfig::violations() const {
    std::vector<std::string> out = model.violations();
    for (auto& v : propagator.violations()) out.push_back(std::move(v));
    if (!(binning.delta > 0.0) || !std::isfinite(binning.delta)) out.emplace_back("delta must be > 0");
    if (workers < 1) out.emplace_back("workers must be >= 1");
    auto nonempty = [&](const std::optional<std::vector<double>>& g, const char* name) {
        if (g && g->empty()) out.push_back(std::string(name) + " list must not be empty");
        if (g) {
            for (const double x : *g) {
                if (!std::isfinite(x)) {
                    out.push_back(std::string(name) + " holds a non-finite value");
                    break;
                }
            }
        }
    };
    nonempty(xi, "xi");
    nonempty(alpha, "alpha");
    nonempty(lambda, "lambda");
    nonempty(energies, "energies");
    if (n_list) {
        if (n_list->empty()) out.emplace_back("N_list must not be empty");
        for (const auto n : *n_list) {
            if (n < 2) {
                out.emplace_back("every entry of N_list must be >= 2");
                break;
            }
        }
    }
    if (eigenstate_count && *eigenstate_count < 2) {
        out.emplace_back("eigenstate_count must be >= 2 (the standard deviation needs two states)");
    }
    if (jr0_trials < 1) out.emplace_back("jr0_trials must be >= 1");
    return out;
}

void validate(const RunConfig& config) {
    auto v = config.violations();
    if (v.empty()) return;
    std::ostringstream msg;
    msg << "invalid configuration:";
    for (const auto& s : v) msg << "\n  - " << s;
    throw ConfigError(msg.str(), std::move(v));
}

RunConfig parse_config(const std::string& text, const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        const std::string msg = source + ": " + where(e.mark) + e.msg;
        throw ConfigError(msg, {msg});
    }
    RunConfig config;
    std::vector<std::string> errors;
    std::vector<std::string> range_errors;
    g_range_errors = &range_errors;
    if (root.IsMap()) {
        for (const auto& kv : root) {
            const auto key = kv.first.Scalar();
            const Setter* set = find_setter(key);
            if (!set) {
                errors.push_back(unknown_message(key, kv.first.Mark()));
                continue;
            }
            try {
                (*set)(config, kv.second);
            } catch (const TypeError& e) {
                errors.push_back(e.message);
            }
        }
    } else if (!root.IsNull()) {
        errors.push_back(where(root.Mark()) + "expected a mapping of key: value pairs");
    }
    g_range_errors = nullptr;
    for (auto& e : range_errors) errors.push_back(std::move(e));
    for (auto& v : config.violations()) errors.push_back(std::move(v));
    if (!errors.empty()) {
        std::ostringstream msg;
        msg << source << ": invalid configuration:";
        for (const auto& e : errors) msg << "\n  - " << e;
        throw ConfigError(msg.str(), std::move(errors));
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        const std::string msg = "cannot read config file " + path.string();
        throw ConfigError(msg, {msg});
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

void apply_override(RunConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        const std::string msg = "--set expects key=value, got '" + assignment + "'";
        throw ConfigError(msg, {msg});
    }
    const std::string key = assignment.substr(0, eq);
    const Setter* set = find_setter(key);
    if (!set) {
        const std::string msg = "--set: " + unknown_message(key, YAML::Mark::null_mark());
        throw ConfigError(msg, {msg});
    }
    std::vector<std::string> range_errors;
    g_range_errors = &range_errors;
    try {
        (*set)(config, YAML::Load(assignment.substr(eq + 1)));
    } catch (const TypeError& e) {
        g_range_errors = nullptr;
        throw ConfigError("--set " + key + ": " + e.message, {e.message});
    } catch (const YAML::Exception& e) {
        g_range_errors = nullptr;
        throw ConfigError("--set " + key + ": " + e.what(), {e.what()});
    }
    g_range_errors = nullptr;
    if (!range_errors.empty()) throw ConfigError("--set: " + range_errors.front(), range_errors);
}

std::string to_yaml(const RunConfig& c) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    auto real = [&](const char* k, double v) { out << YAML::Key << k << YAML::Value << fmt(v); };
    auto reals = [&](const char* k, const std::optional<std::vector<double>>& g, double scalar) {
        out << YAML::Key << k << YAML::Value;
        if (!g || g->size() == 1) {
            out << fmt(g ? g->front() : scalar);
            return;
        }
        out << YAML::Flow << YAML::BeginSeq;
        for (const double x : *g) out << fmt(x);
        out << YAML::EndSeq;
    };
    out << YAML::Key << "N" << YAML::Value << c.model.N;
    if (c.n_list) {
        out << YAML::Key << "N_list" << YAML::Value << YAML::Flow << *c.n_list;
    }
    real("B_z", c.model.B_z);
    real("beta", c.model.beta);
    real("E_bath_min", c.model.E_bath_min);
    real("E_bath_max", c.model.E_bath_max);
    real("sigma_int_sq", c.model.sigma_int_sq);
    reals("xi", c.xi, c.model.xi);
    reals("alpha", c.alpha, c.model.alpha);
    reals("lambda", c.lambda, c.model.lambda);
    real("omega_prot", c.model.omega_prot);
    real("n_periods", c.model.n_periods);
    out << YAML::Key << "seed" << YAML::Value << c.model.seed;
    out << YAML::Key << "scheme" << YAML::Value << (c.propagator.scheme == Scheme::strang2 ? "strang2" : "suzuki4");
    out << YAML::Key << "steps_per_period" << YAML::Value << c.propagator.steps_per_period;
    out << YAML::Key << "richardson_check" << YAML::Value << c.propagator.richardson_check;
    real("tolerance", c.propagator.tolerance);
    real("delta", c.binning.delta);
    if (c.energies) {
        out << YAML::Key << "energies" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (const double x : *c.energies) out << fmt(x);
        out << YAML::EndSeq;
    }
    if (c.eigenstate_count) out << YAML::Key << "eigenstate_count" << YAML::Value << *c.eigenstate_count;
    out << YAML::Key << "output" << YAML::Value << c.output.string();
    out << YAML::Key << "workers" << YAML::Value << c.workers;
    out << YAML::Key << "plots" << YAML::Value << c.plots;
    out << YAML::Key << "jr0_trials" << YAML::Value << c.jr0_trials;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

sweep::SweepSpec make_spec(const RunConfig& c, sweep::Experiment kind) {
    auto s = sweep::preset(kind);
    s.base = c.model;
    s.propagator = c.propagator;
    s.binning = c.binning;
    if (c.xi) s.xi = *c.xi;
    if (c.alpha) s.alpha = *c.alpha;
    if (c.lambda) s.lambda = *c.lambda;
    if (c.energies) s.energies = *c.energies;
    if (c.n_list) s.n_list = *c.n_list;
    if (c.eigenstate_count) s.eigenstate_count = *c.eigenstate_count;
    s.output = c.output;
    s.workers = c.workers;
    return s;
}

}  // namespace tpmwork::cli
