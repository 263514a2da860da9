#pragma once

#include "phwave/discrete_gradient.hpp"
#include "phwave/linalg.hpp"
#include "phwave/scattering.hpp"
#include "phwave/subsystem.hpp"

#include <cmath>
#include <string>

namespace phwave {

struct NewtonOptions {
    /// Converged when ||residual|| <= tol * (1 + ||residual_0||).
    double tol = 1e-12;
    int max_iterations = 50;
    /// Backtracking halves the step down to this floor (2^-20).
    double min_damping = 1.0 / 1048576.0;
    /// Extra full steps taken after convergence while the residual keeps decreasing.
    int polish_steps = 3;
};

/// Linear port condition effort_coeff * e + flow_coeff * f = rhs closing the implicit step.
struct PortConstraint {
    double effort_coeff = 0.0;
    double flow_coeff = 0.0;
    Vec rhs;
};

namespace detail {

/// Residual of the implicit discrete-gradient step in the unknowns z = (x+, e, f):
///   x+ - x - dt[(J-R) dg + (G - R_xu) u]
///   y - [(G + R_xu)^T dg + D u]
///   ce e + cf f - rhs
/// with structure evaluated at the midpoint and (u, y) the (input, output) pair.
class StepEquations {
public:
    StepEquations(const SubsystemModel& model, const Vec& x, const PortConstraint& pc, double dt)
        : model_(model), x_(x), pc_(pc), dt_(dt), n_(model.state_dim), m_(model.port_dim) {}

    Eigen::Index size() const { return n_ + 2 * m_; }

    Vec residual(const Vec& z) const {
        const Vec xn = z.head(n_);
        const auto [u, y] = split(z);
        const Vec mid = 0.5 * (x_ + xn);
        const Vec dg = discrete_gradient(model_, x_, xn);
        const Mat Rxu = model_.cross_at(mid);
        const Mat G = model_.port_G(mid);

        Vec r(size());
        r.head(n_) = xn - x_ -
                     dt_ * ((model_.structure_J(mid) - model_.dissipation_R(mid)) * dg + (G - Rxu) * u);
        r.segment(n_, m_) = y - ((G + Rxu).transpose() * dg + model_.feedthrough_at(mid) * u);
        r.tail(m_) = pc_.effort_coeff * z.segment(n_, m_) + pc_.flow_coeff * z.tail(m_) - pc_.rhs;
        return r;
    }

    Mat jacobian(const Vec& z) const {
        if (model_.hessian && model_.constant_structure) return analytic_jacobian(z);
        return finite_difference_jacobian(z);
    }

    /// Starting point: x+ = x, port from the explicit output map at x and the constraint.
    Vec initial_guess() const {
        Vec z = Vec::Zero(size());
        z.head(n_) = x_;
        const Mat C = model_.port_G(x_) + model_.cross_at(x_);
        const Vec c0 = C.transpose() * model_.grad_hamiltonian(x_);
        const Mat D = model_.feedthrough_at(x_);
        const Mat I = Mat::Identity(m_, m_);
        const double ce = pc_.effort_coeff;
        const double cf = pc_.flow_coeff;
        Mat A;
        Vec rhs;
        if (model_.causality == Causality::effort_in) {
            A = ce * I + cf * D;
            rhs = pc_.rhs - cf * c0;
        } else {
            A = ce * D + cf * I;
            rhs = pc_.rhs - ce * c0;
        }
        Eigen::FullPivLU<Mat> lu(A);
        const Vec u = lu.isInvertible() ? Vec(lu.solve(rhs)) : Vec(Vec::Zero(m_));
        const Vec y = c0 + D * u;
        place(z, u, y);
        return z;
    }

    std::pair<Vec, Vec> split(const Vec& z) const {
        if (model_.causality == Causality::effort_in) return {z.segment(n_, m_), z.tail(m_)};
        return {z.tail(m_), z.segment(n_, m_)};
    }

private:
    void place(Vec& z, const Vec& u, const Vec& y) const {
        if (model_.causality == Causality::effort_in) {
            z.segment(n_, m_) = u;
            z.tail(m_) = y;
        } else {
            z.segment(n_, m_) = y;
            z.tail(m_) = u;
        }
    }

    Mat analytic_jacobian(const Vec& z) const {
        const Vec xn = z.head(n_);
        const Vec mid = 0.5 * (x_ + xn);
        const Mat dg = discrete_gradient_jacobian(model_, x_, xn);
        const Mat Rxu = model_.cross_at(mid);
        const Mat G = model_.port_G(mid);
        const Mat JR = model_.structure_J(mid) - model_.dissipation_R(mid);

        Mat jac = Mat::Zero(size(), size());
        jac.topLeftCorner(n_, n_) = Mat::Identity(n_, n_) - dt_ * JR * dg;
        jac.block(n_, 0, m_, n_) = -(G + Rxu).transpose() * dg;

        const Eigen::Index u_col = model_.causality == Causality::effort_in ? n_ : n_ + m_;
        const Eigen::Index y_col = model_.causality == Causality::effort_in ? n_ + m_ : n_;
        jac.block(0, u_col, n_, m_) = -dt_ * (G - Rxu);
        jac.block(n_, u_col, m_, m_) = -model_.feedthrough_at(mid);
        jac.block(n_, y_col, m_, m_) += Mat::Identity(m_, m_);

        jac.block(n_ + m_, n_, m_, m_) = pc_.effort_coeff * Mat::Identity(m_, m_);
        jac.block(n_ + m_, n_ + m_, m_, m_) = pc_.flow_coeff * Mat::Identity(m_, m_);
        return jac;
    }

    Mat finite_difference_jacobian(const Vec& z) const {
        Mat jac(size(), size());
        Vec zp = z;
        for (Eigen::Index j = 0; j < size(); ++j) {
            const double h = 1e-7 * (1.0 + std::abs(z[j]));
            zp[j] = z[j] + h;
            const Vec rp = residual(zp);
            zp[j] = z[j] - h;
            const Vec rm = residual(zp);
            zp[j] = z[j];
            jac.col(j) = (rp - rm) / (2.0 * h);
        }
        return jac;
    }

    const SubsystemModel& model_;
    const Vec& x_;
    const PortConstraint& pc_;
    double dt_;
    Eigen::Index n_;
    Eigen::Index m_;
};

struct ImplicitSolution {
    Vec next_state;
    PortSample port;
    int iterations = 0;
    double residual = 0.0;
};

inline ImplicitSolution solve_implicit_step(const SubsystemModel& model, const Vec& x,
                                            const PortConstraint& pc, double dt,
                                            const NewtonOptions& opts) {
    const StepEquations eqs(model, x, pc, dt);
    Vec z = eqs.initial_guess();
    Vec r = eqs.residual(z);
    double rnorm = r.norm();
    const double threshold = opts.tol * (1.0 + rnorm);

    auto newton_direction = [&](const Vec& zz, const Vec& rr) -> Vec {
        return eqs.jacobian(zz).partialPivLu().solve(-rr);
    };

    int iterations = 0;
    bool converged = std::isfinite(rnorm) && rnorm <= threshold;
    while (!converged && iterations < opts.max_iterations) {
        const Vec dz = newton_direction(z, r);
        double lambda = 1.0;
        bool accepted = false;
        while (lambda >= opts.min_damping) {
            const Vec trial = z + lambda * dz;
            const Vec rt = eqs.residual(trial);
            const double rtn = rt.norm();
            if (std::isfinite(rtn) && rtn < rnorm) {
                z = trial;
                r = rt;
                rnorm = rtn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        ++iterations;
        if (!accepted) break;
        converged = rnorm <= threshold;
    }
    if (!converged) {
        throw SolverFailure("implicit step of subsystem '" + model.label + "' did not converge after " +
                                std::to_string(iterations) + " iterations (residual " +
                                format_double(rnorm) + ", threshold " + format_double(threshold) + "); (dt, gamma) may be outside the solvable regime",
                            rnorm);
    }
    for (int k = 0; k < opts.polish_steps && rnorm > 0.0; ++k) {
        const Vec trial = z + newton_direction(z, r);
        const Vec rt = eqs.residual(trial);
        const double rtn = rt.norm();
        if (!(rtn < rnorm)) break;
        z = trial;
        r = rt;
        rnorm = rtn;
        ++iterations;
    }

    ImplicitSolution sol;
    sol.next_state = z.head(model.state_dim);
    sol.port.effort = z.segment(model.state_dim, model.port_dim);
    sol.port.flow = z.tail(model.port_dim);
    sol.iterations = iterations;
    sol.residual = rnorm;
    return sol;
}

}  // namespace detail

/// One implicit discrete-gradient step of a subsystem closed by the incident wave a_in.
///
/// Solves x+ = x + dt[(J-R)(xm) dg(x, x+) + (G - R_xu)(xm) u], y = (G + R_xu)^T dg + D u,
/// a_in = sqrt(dt/(2 gamma)) (e + gamma f), and returns b = sqrt(dt/(2 gamma)) (e - gamma f).
/// The discrete passivity residual (H(x+) - H(x)) - 1/2(|a_in|^2 - |b|^2) is <= 0 up to roundoff.
inline StepResult step_with_wave(const SubsystemModel& model, const Vec& x, const Vec& a_in,
                                 const ScatteringConfig& cfg, const NewtonOptions& opts = {}) {
    cfg.validate();
    require_size(x, model.state_dim, "step_with_wave: state");
    require_size(a_in, model.port_dim, "step_with_wave: incident wave");
    require_finite(x, "step_with_wave: state");
    require_finite(a_in, "step_with_wave: incident wave");

    const double k = cfg.wave_scale();
    const PortConstraint pc{k, k * cfg.gamma, a_in};
    auto sol = detail::solve_implicit_step(model, x, pc, cfg.dt, opts);

    StepResult out;
    out.outgoing = k * (sol.port.effort - cfg.gamma * sol.port.flow);
    out.next_state = std::move(sol.next_state);
    out.port = std::move(sol.port);
    out.solver_iterations = sol.iterations;
    out.solver_residual = sol.residual;
    return out;
}

/// Same step with the input port variable prescribed (effort for effort_in, flow for flow_in).
inline StepResult step_with_input(const SubsystemModel& model, const Vec& x, const Vec& input,
                                  const ScatteringConfig& cfg, const NewtonOptions& opts = {}) {
    cfg.validate();
    require_size(x, model.state_dim, "step_with_input: state");
    require_size(input, model.port_dim, "step_with_input: input");
    require_finite(x, "step_with_input: state");
    require_finite(input, "step_with_input: input");

    const PortConstraint pc = model.causality == Causality::effort_in ? PortConstraint{1.0, 0.0, input}
                                                                      : PortConstraint{0.0, 1.0, input};
    auto sol = detail::solve_implicit_step(model, x, pc, cfg.dt, opts);

    StepResult out;
    out.outgoing = cfg.wave_scale() * (sol.port.effort - cfg.gamma * sol.port.flow);
    out.next_state = std::move(sol.next_state);
    out.port = std::move(sol.port);
    out.solver_iterations = sol.iterations;
    out.solver_residual = sol.residual;
    return out;
}

/// Frozen scattering port map a -> b at state x_frozen. Pure; never touches committed state.
inline Vec frozen_port_map(const SubsystemModel& model, const Vec& x_frozen, const Vec& a_in,
                           const ScatteringConfig& cfg, const NewtonOptions& opts = {}) {
    return step_with_wave(model, x_frozen, a_in, cfg, opts).outgoing;
}

/// Instantaneous port sample with zero input in the model's own causality.
inline PortSample zero_input_port(const SubsystemModel& model, const Vec& x) {
    require_size(x, model.state_dim, "zero_input_port: state");
    const Mat C = model.port_G(x) + model.cross_at(x);
    Vec output = C.transpose() * model.grad_hamiltonian(x);
    return port_from_input_output(model, Vec::Zero(model.port_dim), std::move(output));
}

/// Discrete passivity residual (H(x+) - H(x)) - 1/2(|a|^2 - |b|^2).
inline double step_passivity_residual(const SubsystemModel& model, const Vec& x, const Vec& a_in,
                                      const StepResult& step) {
    return (model.hamiltonian(step.next_state) - model.hamiltonian(x)) -
           0.5 * (a_in.squaredNorm() - step.outgoing.squaredNorm());
}

}  // namespace phwave
