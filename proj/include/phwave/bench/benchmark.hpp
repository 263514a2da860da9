#pragma once

#include "phwave/bench/config.hpp"
#include "phwave/coupling.hpp"
#include "phwave/subsystem.hpp"

#include <vector>

namespace phwave::bench {

/// Subsystem A: mass m1 on a hardening spring, state (q1, p1), force in / velocity out.
///   H_A = p1^2/(2 m1) + 1/2 k1 q1^2 + 1/4 k_nl q1^4
inline SubsystemModel make_duffing_subsystem(const BenchmarkConfig& cfg) {
    const double m1 = cfg.m1, k1 = cfg.k1, knl = cfg.k_nl, c1 = cfg.c1;
    SubsystemModel a;
    a.label = "A";
    a.state_dim = 2;
    a.port_dim = 1;
    a.causality = Causality::effort_in;
    a.constant_structure = true;
    a.hamiltonian = [=](const Vec& x) {
        const double q = x[0], p = x[1];
        return p * p / (2.0 * m1) + 0.5 * k1 * q * q + 0.25 * knl * q * q * q * q;
    };
    a.grad_hamiltonian = [=](const Vec& x) -> Vec {
        const double q = x[0];
        return Eigen::Vector2d(k1 * q + knl * q * q * q, x[1] / m1);
    };
    // only the quartic term contributes: 1/4 k_nl (q'^4 - q^4 - 4 m^3 d) = 1/4 k_nl m d^3
    a.gradient_defect = [=](const Vec& x, const Vec& xn) {
        const double d = xn[0] - x[0], m = 0.5 * (x[0] + xn[0]);
        return 0.25 * knl * m * d * d * d;
    };
    a.hessian = [=](const Vec& x) -> Mat {
        Mat h = Mat::Zero(2, 2);
        h(0, 0) = k1 + 3.0 * knl * x[0] * x[0];
        h(1, 1) = 1.0 / m1;
        return h;
    };
    Mat J(2, 2);
    J << 0.0, 1.0, -1.0, 0.0;
    Mat R = Mat::Zero(2, 2);
    R(1, 1) = c1;
    Mat G(2, 1);
    G << 0.0, 1.0;
    a.structure_J = [J](const Vec&) -> Mat { return J; };
    a.dissipation_R = [R](const Vec&) -> Mat { return R; };
    a.port_G = [G](const Vec&) -> Mat { return G; };
    return a;
}

/// Subsystem B: mass m2 on spring k2 plus the series coupling element (k12, c12) with
/// elongation s = q1 - q2. State (q2, p2, s); velocity in (f_B = -v1) / force out (e_B = force on m1).
///   H_B = p2^2/(2 m2) + 1/2 k2 q2^2 + 1/2 k12 s^2
/// The damper acts on ds/dt = v1 - v2, so it couples state and port through
/// R_xu = (0, c12, 0)^T and feedthrough D = c12.
inline SubsystemModel make_linear_subsystem_b(const BenchmarkConfig& cfg) {
    Mat Q = Mat::Zero(3, 3);
    Q(0, 0) = cfg.k2;
    Q(1, 1) = 1.0 / cfg.m2;
    Q(2, 2) = cfg.k12;
    Mat J(3, 3);
    J << 0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0;
    Mat R = Mat::Zero(3, 3);
    R(1, 1) = cfg.c12 + cfg.c2;
    Mat G(3, 1);
    G << 0.0, 0.0, -1.0;
    Mat cross(3, 1);
    cross << 0.0, cfg.c12, 0.0;
    Mat D(1, 1);
    D << cfg.c12;
    return make_linear_subsystem("B", Q, J, R, G, Causality::flow_in, cross, D);
}

/// Both subsystems, swap coupling and scattering settings of the benchmark.
inline CoupledSystem build_benchmark(const BenchmarkConfig& cfg) {
    cfg.validate();
    CoupledSystem sys;
    sys.models.push_back(make_duffing_subsystem(cfg));
    sys.models.push_back(make_linear_subsystem_b(cfg));
    sys.coupling = CouplingStructure::swap(1);
    sys.scattering = ScatteringConfig{cfg.gamma, cfg.dt};
    sys.validate();
    return sys;
}

inline std::vector<Vec> initial_states(const BenchmarkConfig& cfg) {
    return {Eigen::Vector2d(cfg.q1_0, cfg.m1 * cfg.v1_0),
            Eigen::Vector3d(cfg.q2_0, cfg.m2 * cfg.v2_0, cfg.q1_0 - cfg.q2_0)};
}

/// Physical observables at one grid point.
struct BenchmarkSample {
    double q1 = 0.0;
    double v1 = 0.0;
    double q2 = 0.0;
    double v2 = 0.0;
    double s = 0.0;
};

inline BenchmarkSample observe(const BenchmarkConfig& cfg, const std::vector<Vec>& states) {
    return {states[0][0], states[0][1] / cfg.m1, states[1][0], states[1][1] / cfg.m2, states[1][2]};
}

inline std::vector<Vec> states_from_sample(const BenchmarkConfig& cfg, const BenchmarkSample& s) {
    return {Eigen::Vector2d(s.q1, cfg.m1 * s.v1), Eigen::Vector3d(s.q2, cfg.m2 * s.v2, s.s)};
}

}  // namespace phwave::bench
