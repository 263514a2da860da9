#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace phwave {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown when a caller breaks a documented precondition (dimensions, finiteness, positivity).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an implicit solve does not converge. Carries the last residual norm.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, double last_residual)
        : std::runtime_error(what), last_residual_(last_residual) {}

    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ContractViolation(message);
}

inline void require_finite(const Vec& v, const char* what) {
    if (!v.allFinite()) throw ContractViolation(std::string(what) + " has non-finite entries");
}

inline void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw ContractViolation(std::string(what) + " is not finite");
}

inline void require_size(const Vec& v, Eigen::Index n, const char* what) {
    if (v.size() != n) {
        throw ContractViolation(std::string(what) + ": expected length " + std::to_string(n) +
                                ", got " + std::to_string(v.size()));
    }
}

inline double positive_part(double v) noexcept { return v > 0.0 ? v : 0.0; }

}  // namespace phwave
