#pragma once

#include "phwave/linalg.hpp"
#include "phwave/subsystem.hpp"

#include <cmath>

namespace phwave {

struct ScatteringConfig {
    double gamma = 1.0;  // impedance, N*s/m
    double dt = 1.0;     // macro-step, s

    void validate() const {
        require(std::isfinite(gamma) && gamma > 0.0, "ScatteringConfig: gamma must be positive");
        require(std::isfinite(dt) && dt > 0.0, "ScatteringConfig: dt must be positive");
    }

    /// sqrt(dt / (2 gamma)): waves carry sqrt(dt) so that 1/2(|a|^2 - |b|^2) = dt e^T f.
    double wave_scale() const { return std::sqrt(dt / (2.0 * gamma)); }
};

struct WavePair {
    Vec a;  // incident
    Vec b;  // outgoing
};

/// Stacked wave pair zeta = col(a, b), a and b of equal length.
struct LiftedWaveState {
    Vec zeta;

    LiftedWaveState() = default;
    explicit LiftedWaveState(Vec z) : zeta(std::move(z)) {
        require(zeta.size() % 2 == 0, "LiftedWaveState: odd length");
    }
    LiftedWaveState(const Vec& a, const Vec& b) : zeta(a.size() + b.size()) {
        require(a.size() == b.size(), "LiftedWaveState: a and b differ in length");
        zeta << a, b;
    }

    Eigen::Index half() const { return zeta.size() / 2; }
    auto a() const { return zeta.head(half()); }
    auto b() const { return zeta.tail(half()); }
    auto a() { return zeta.head(half()); }
    auto b() { return zeta.tail(half()); }
};

inline WavePair port_to_wave(const PortSample& p, const ScatteringConfig& cfg) {
    cfg.validate();
    require(p.effort.size() == p.flow.size(), "port_to_wave: effort/flow length mismatch");
    require_finite(p.effort, "port_to_wave: effort");
    require_finite(p.flow, "port_to_wave: flow");
    const double k = cfg.wave_scale();
    return {k * (p.effort + cfg.gamma * p.flow), k * (p.effort - cfg.gamma * p.flow)};
}

inline PortSample wave_to_port(const WavePair& w, const ScatteringConfig& cfg) {
    cfg.validate();
    require(w.a.size() == w.b.size(), "wave_to_port: a/b length mismatch");
    require_finite(w.a, "wave_to_port: a");
    require_finite(w.b, "wave_to_port: b");
    const double ke = std::sqrt(cfg.gamma / (2.0 * cfg.dt));
    const double kf = 1.0 / std::sqrt(2.0 * cfg.gamma * cfg.dt);
    return {ke * (w.a + w.b), kf * (w.a - w.b)};
}

/// Discrete supply 1/2(|a|^2 - |b|^2), in joules.
inline double wave_power(const WavePair& w) {
    require(w.a.size() == w.b.size(), "wave_power: a/b length mismatch");
    return 0.5 * (w.a.squaredNorm() - w.b.squaredNorm());
}

inline double wave_power(const Vec& a, const Vec& b) { return wave_power(WavePair{a, b}); }

/// Lossless interconnection a = P b with P orthogonal (2m x 2m for two subsystems).
class CouplingStructure {
public:
    CouplingStructure() = default;

    /// General orthogonal P; rejects ||P^T P - I|| > 1e-13.
    explicit CouplingStructure(Mat P) : P_(std::move(P)) {
        require(P_.rows() == P_.cols() && P_.rows() > 0, "CouplingStructure: P must be square");
        const auto n = P_.rows();
        require((P_.transpose() * P_ - Mat::Identity(n, n)).norm() <= 1e-13,
                "CouplingStructure: P is not orthogonal");
        resolvent_ = (2.0 * Mat::Identity(n, n) - P_).inverse();
    }

    /// Effort/flow interconnection e_A = e_B, f_A + f_B = 0, i.e. a_A = b_B, a_B = b_A.
    static CouplingStructure swap(int m) {
        require(m > 0, "CouplingStructure::swap: m must be positive");
        Mat P = Mat::Zero(2 * m, 2 * m);
        P.topRightCorner(m, m).setIdentity();
        P.bottomLeftCorner(m, m).setIdentity();
        CouplingStructure c(std::move(P));
        // (2I - P)(2I + P) = 3I when P^2 = I; use the exact closed form.
        c.resolvent_ = (2.0 * Mat::Identity(2 * m, 2 * m) + c.P_) / 3.0;
        return c;
    }

    const Mat& P() const { return P_; }
    Eigen::Index dim() const { return P_.rows(); }

    /// J_L = (2I - P)^{-1}, resolvent of L = I - P.
    const Mat& coupling_resolvent() const { return resolvent_; }

    Vec apply(const Vec& b) const {
        require_size(b, dim(), "CouplingStructure::apply");
        return P_ * b;
    }

    double orthogonality_defect() const {
        return (P_.transpose() * P_ - Mat::Identity(dim(), dim())).norm();
    }

private:
    Mat P_;
    Mat resolvent_;
};

/// Euclidean projection onto {col(a, b) : a = P b}: col(P bb, bb) with bb = 1/2(b + P^T a).
inline LiftedWaveState coupling_projection(const LiftedWaveState& zeta_in, const CouplingStructure& C) {
    require(zeta_in.half() == C.dim(), "coupling_projection: dimension mismatch");
    const Vec bbar = 0.5 * (zeta_in.b() + C.P().transpose() * zeta_in.a());
    return LiftedWaveState(C.P() * bbar, bbar);
}

}  // namespace phwave
