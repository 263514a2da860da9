#pragma once

#include "phwave/linalg.hpp"

#include <functional>
#include <span>
#include <string>
#include <utility>

namespace phwave {

/// Which port variable the subsystem takes as input.
///
/// effort_in:  x' = (J-R)dH + (G - R_xu) e,   f = (G + R_xu)^T dH + D e
/// flow_in:    x' = (J-R)dH + (G - R_xu) f,   e = (G + R_xu)^T dH + D f
///
/// With R_xu = 0 and D = 0 the effort_in form is the classical input-state-output
/// port-Hamiltonian system. The extended dissipation [[R, R_xu], [R_xu^T, D]] must be PSD.
enum class Causality { effort_in, flow_in };

struct SubsystemModel {
    std::string label;
    int state_dim = 0;
    int port_dim = 0;
    Causality causality = Causality::effort_in;

    std::function<double(const Vec&)> hamiltonian;
    std::function<Vec(const Vec&)> grad_hamiltonian;
    /// Optional. Enables the analytic Newton Jacobian when structure is constant.
    std::function<Mat(const Vec&)> hessian;
    /// Optional closed form of H(x') - H(x) - dH((x + x')/2)^T (x' - x). Without it the
    /// discrete gradient differences H directly, which loses digits for short steps.
    std::function<double(const Vec&, const Vec&)> gradient_defect;

    std::function<Mat(const Vec&)> structure_J;    // n x n, skew
    std::function<Mat(const Vec&)> dissipation_R;  // n x n, symmetric PSD
    std::function<Mat(const Vec&)> port_G;         // n x m
    /// Optional resistive coupling between state and port (n x m) and port feedthrough (m x m).
    std::function<Mat(const Vec&)> cross_dissipation;
    std::function<Mat(const Vec&)> feedthrough_D;

    /// J, R, G, R_xu, D do not depend on the state.
    bool constant_structure = false;

    Mat cross_at(const Vec& x) const {
        return cross_dissipation ? cross_dissipation(x) : Mat::Zero(state_dim, port_dim);
    }
    Mat feedthrough_at(const Vec& x) const {
        return feedthrough_D ? feedthrough_D(x) : Mat::Zero(port_dim, port_dim);
    }
};

struct PortSample {
    Vec effort;
    Vec flow;

    double power() const { return effort.dot(flow); }
};

struct StepResult {
    Vec next_state;
    Vec outgoing;  // b
    PortSample port;
    int solver_iterations = 0;
    double solver_residual = 0.0;
};

/// Splits a port sample into (input, output) according to causality.
inline std::pair<const Vec&, const Vec&> input_output(const SubsystemModel& model, const PortSample& p) {
    if (model.causality == Causality::effort_in) return {p.effort, p.flow};
    return {p.flow, p.effort};
}

inline PortSample port_from_input_output(const SubsystemModel& model, Vec input, Vec output) {
    if (model.causality == Causality::effort_in) return {std::move(input), std::move(output)};
    return {std::move(output), std::move(input)};
}

/// Result of sampling the structural invariants of a model.
struct StructureCheck {
    double max_skew_defect = 0.0;        // max ||J + J^T|| / (1 + ||J||)
    double max_symmetry_defect = 0.0;    // max ||R_e - R_e^T||
    double min_dissipation_eig = 0.0;    // min eigenvalue of the extended dissipation
    double min_hamiltonian = 0.0;
    bool ok = true;
};

inline Mat extended_dissipation(const SubsystemModel& model, const Vec& x) {
    const int n = model.state_dim;
    const int m = model.port_dim;
    Mat Re = Mat::Zero(n + m, n + m);
    Re.topLeftCorner(n, n) = model.dissipation_R(x);
    const Mat Rxu = model.cross_at(x);
    Re.topRightCorner(n, m) = Rxu;
    Re.bottomLeftCorner(m, n) = Rxu.transpose();
    Re.bottomRightCorner(m, m) = model.feedthrough_at(x);
    return Re;
}

/// Checks skewness of J, symmetry/PSD of the extended dissipation and records min H over samples.
inline StructureCheck check_structure(const SubsystemModel& model, std::span<const Vec> samples) {
    StructureCheck out;
    out.min_dissipation_eig = std::numeric_limits<double>::infinity();
    out.min_hamiltonian = std::numeric_limits<double>::infinity();
    for (const Vec& x : samples) {
        require_size(x, model.state_dim, "structure sample");
        const Mat J = model.structure_J(x);
        const double skew = (J + J.transpose()).norm() / (1.0 + J.norm());
        out.max_skew_defect = std::max(out.max_skew_defect, skew);

        const Mat Re = extended_dissipation(model, x);
        out.max_symmetry_defect = std::max(out.max_symmetry_defect, (Re - Re.transpose()).norm());
        const Mat sym = 0.5 * (Re + Re.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> eig(sym, Eigen::EigenvaluesOnly);
        out.min_dissipation_eig = std::min(out.min_dissipation_eig, eig.eigenvalues().minCoeff());
        out.min_hamiltonian = std::min(out.min_hamiltonian, model.hamiltonian(x));
    }
    out.ok = out.max_skew_defect <= 1e-12 && out.max_symmetry_defect <= 1e-12 &&
             out.min_dissipation_eig >= -1e-12 && std::isfinite(out.min_hamiltonian);
    return out;
}

/// Linear port-Hamiltonian model with H = 1/2 x^T Q x and constant structure.
inline SubsystemModel make_linear_subsystem(std::string label, Mat Q, Mat J, Mat R, Mat G,
                                            Causality causality = Causality::effort_in,
                                            Mat cross = Mat(), Mat feedthrough = Mat()) {
    const auto n = Q.rows();
    const auto m = G.cols();
    require(Q.cols() == n && J.rows() == n && J.cols() == n && R.rows() == n && R.cols() == n &&
                G.rows() == n,
            "make_linear_subsystem: inconsistent dimensions");
    if (cross.size() == 0) cross = Mat::Zero(n, m);
    if (feedthrough.size() == 0) feedthrough = Mat::Zero(m, m);

    SubsystemModel model;
    model.label = std::move(label);
    model.state_dim = static_cast<int>(n);
    model.port_dim = static_cast<int>(m);
    model.causality = causality;
    model.constant_structure = true;
    model.hamiltonian = [Q](const Vec& x) { return 0.5 * x.dot(Q * x); };
    model.grad_hamiltonian = [Q](const Vec& x) -> Vec { return Q * x; };
    model.hessian = [Q](const Vec&) -> Mat { return Q; };
    model.gradient_defect = [](const Vec&, const Vec&) { return 0.0; };
    model.structure_J = [J](const Vec&) -> Mat { return J; };
    model.dissipation_R = [R](const Vec&) -> Mat { return R; };
    model.port_G = [G](const Vec&) -> Mat { return G; };
    model.cross_dissipation = [cross](const Vec&) -> Mat { return cross; };
    model.feedthrough_D = [feedthrough](const Vec&) -> Mat { return feedthrough; };
    return model;
}

}  // namespace phwave
