#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tpmwork {

/// Invalid user configuration (bad file, unknown key, out-of-domain value).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
    ConfigError(const std::string& what, std::vector<std::string> violations)
        : std::runtime_error(what), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// A numerical kernel failed or produced a result outside its tolerance.
/// `residual()` carries the measured defect that triggered the failure.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Time-step halving did not bring the propagated states within tolerance.
class NonconvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace tpmwork
