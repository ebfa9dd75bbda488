#include "tpmwork/params.hpp"

#include <cmath>
#include <sstream>

#include "tpmwork/errors.hpp"

namespace tpmwork {

bool ModelParams::is_cyclic() const noexcept {
    const double twice = 2.0 * n_periods;
    return std::isfinite(twice) && twice == std::round(twice);
}

std::vector<std::string> ModelParams::violations() const {
    std::vector<std::string> out;
    auto require = [&out](bool ok, const char* what) {
        if (!ok) out.emplace_back(what);
    };
    require(N >= 2, "N must be >= 2");
    require(B_z > 0.0, "B_z must be > 0");
    require(beta > 0.0, "beta must be > 0");
    require(E_bath_max > E_bath_min, "E_bath_max must be > E_bath_min");
    require(sigma_int_sq > 0.0, "sigma_int_sq must be > 0");
    require(omega_prot > 0.0, "omega_prot must be > 0");
    require(n_periods > 0.0, "n_periods must be > 0");
    require(!(n_periods > 0.0) || is_cyclic(),
            "n_periods must be a multiple of 0.5 so that sin(omega_prot T) = 0 (cyclic protocol)");
    require(std::isfinite(xi), "xi must be finite");
    require(std::isfinite(alpha), "alpha must be finite");
    require(std::isfinite(lambda), "lambda must be finite");
    return out;
}

void ModelParams::validate() const {
    auto v = violations();
    if (v.empty()) return;
    std::ostringstream msg;
    msg << "invalid model parameters:";
    for (const auto& s : v) msg << "\n  - " << s;
    throw ConfigError(msg.str(), std::move(v));
}

}  // namespace tpmwork
