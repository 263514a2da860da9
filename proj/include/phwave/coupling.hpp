#pragma once

#include "phwave/integrator.hpp"
#include "phwave/linalg.hpp"
#include "phwave/scattering.hpp"
#include "phwave/subsystem.hpp"

#include <future>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace phwave {

/// Subsystems joined through one orthogonal wave coupling.
struct CoupledSystem {
    std::vector<SubsystemModel> models;
    CouplingStructure coupling;
    ScatteringConfig scattering;
    NewtonOptions newton;

    Eigen::Index wave_dim() const {
        Eigen::Index total = 0;
        for (const auto& m : models) total += m.port_dim;
        return total;
    }

    Eigen::Index offset(std::size_t i) const {
        Eigen::Index off = 0;
        for (std::size_t j = 0; j < i; ++j) off += models[j].port_dim;
        return off;
    }

    void validate() const {
        require(!models.empty(), "CoupledSystem: no subsystems");
        require(wave_dim() == coupling.dim(), "CoupledSystem: port dimensions do not match coupling matrix");
        scattering.validate();
    }

    void validate_states(std::span<const Vec> states) const {
        require(states.size() == models.size(), "CoupledSystem: wrong number of subsystem states");
        for (std::size_t i = 0; i < models.size(); ++i) {
            require_size(states[i], models[i].state_dim, "CoupledSystem: subsystem state");
            require_finite(states[i], "CoupledSystem: subsystem state");
        }
    }
};

/// Stacked frozen map S^n = diag(S_1^n, ..., S_N^n) for fixed subsystem states.
///
/// With `parallel` set, blocks are evaluated on separate threads. Each block writes a
/// disjoint segment, so the result does not depend on scheduling.
class StackedPortMap {
public:
    StackedPortMap(const CoupledSystem& system, std::span<const Vec> states, bool parallel = false)
        : system_(&system), states_(states.begin(), states.end()), parallel_(parallel) {
        system.validate();
        system.validate_states(states);
    }

    Eigen::Index dim() const { return system_->wave_dim(); }

    Vec block(const Vec& a_block, std::size_t i) const {
        return frozen_port_map(system_->models[i], states_[i], a_block, system_->scattering,
                               system_->newton);
    }

    Vec operator()(const Vec& a) const {
        require_size(a, dim(), "StackedPortMap: incident wave");
        const std::size_t count = system_->models.size();
        Vec b(dim());
        if (!parallel_ || count < 2) {
            for (std::size_t i = 0; i < count; ++i) write_block(a, b, i);
            return b;
        }
        std::vector<std::future<void>> tasks;
        tasks.reserve(count - 1);
        for (std::size_t i = 1; i < count; ++i) {
            tasks.push_back(std::async(std::launch::async, [this, &a, &b, i] { write_block(a, b, i); }));
        }
        write_block(a, b, 0);
        for (auto& t : tasks) t.get();
        return b;
    }

private:
    void write_block(const Vec& a, Vec& b, std::size_t i) const {
        const auto off = system_->offset(i);
        const auto m = system_->models[i].port_dim;
        b.segment(off, m) = block(a.segment(off, m), i);
    }

    const CoupledSystem* system_;
    std::vector<Vec> states_;
    bool parallel_;
};

struct DrStep {
    Vec next;
    Vec shadow;
};

/// Reduced Douglas-Rachford step for 0 in A(b) + (I - P) b with S = J_A:
///   shadow = S(u);  v = J_L(2 shadow - u);  u+ = u + v - shadow,   J_L = (2I - P)^{-1}.
template <class PortMap>
DrStep reduced_dr_step(const Vec& u, const PortMap& S, const CouplingStructure& C) {
    require_size(u, C.dim(), "reduced_dr_step: iterate");
    Vec shadow = S(u);
    const Vec v = C.coupling_resolvent() * (2.0 * shadow - u);
    return {u + v - shadow, std::move(shadow)};
}

struct LiftedDrStep {
    LiftedWaveState next;
    Vec shadow;
};

/// Lifted step on zeta = col(a, b):
///   shadow = S(a);  y = col(a, shadow);  y~ = Pi_C(2y - zeta);  zeta+ = zeta + y~ - y.
template <class PortMap>
LiftedDrStep lifted_dr_step(const LiftedWaveState& zeta, const PortMap& S, const CouplingStructure& C) {
    require(zeta.half() == C.dim(), "lifted_dr_step: dimension mismatch");
    Vec a = zeta.a();
    Vec shadow = S(a);
    const LiftedWaveState y(a, shadow);
    const LiftedWaveState reflected(Vec(2.0 * y.zeta - zeta.zeta));
    const LiftedWaveState projected = coupling_projection(reflected, C);
    return {LiftedWaveState(Vec(zeta.zeta + projected.zeta - y.zeta)), std::move(shadow)};
}

enum class InnerVariant { reduced, lifted };

inline const char* to_string(InnerVariant v) { return v == InnerVariant::reduced ? "reduced" : "lifted"; }

struct InnerLoopConfig {
    int budget = 0;       // K_n
    double eps = 1e-12;   // stop when ||iterate^{k+1} - iterate^k|| <= eps
    InnerVariant variant = InnerVariant::reduced;
    bool parallel = false;

    void validate() const {
        require(budget >= 0, "InnerLoopConfig: budget must be non-negative");
        require(std::isfinite(eps) && eps > 0.0, "InnerLoopConfig: eps must be positive");
    }
};

struct InnerLoopTrace {
    InnerVariant variant = InnerVariant::reduced;
    /// iterates[0..steps_used]: u^{n,k} (reduced) or zeta^{n,k} (lifted).
    std::vector<Vec> iterates;
    /// shadows[k] = S(incident part of iterates[k]), k < steps_used.
    std::vector<Vec> shadows;
    Vec final_shadow;
    int steps_used = 0;
    std::vector<double> step_residuals;
    /// Lifted only: reduced iterates run for the same number of steps, for certification.
    std::vector<Vec> certification_iterates;

    /// u^{n,0..K} of the reduced iteration, whichever variant drove the step.
    const std::vector<Vec>& reduced_iterates() const {
        return variant == InnerVariant::reduced ? iterates : certification_iterates;
    }

    /// Incident wave at which S was evaluated in inner step k.
    Vec incident_at(std::size_t k) const {
        if (variant == InnerVariant::reduced) return iterates[k];
        return LiftedWaveState(iterates[k]).a();
    }
};

/// Inner interface reconciliation at one macro-step (early-terminable).
///
/// Starts from b_init (previous outgoing waves): u^0 = P b_init, or zeta^0 = col(P b_init, b_init).
/// Runs until k = budget or the successive-iterate norm drops to eps. final_shadow is the
/// last computed shadow, or b_init when the budget is zero.
template <class PortMap>
InnerLoopTrace run_inner_loop(const PortMap& S, const Vec& b_init, const InnerLoopConfig& cfg,
                              const CouplingStructure& C) {
    cfg.validate();
    require_size(b_init, C.dim(), "run_inner_loop: initial outgoing wave");
    require_finite(b_init, "run_inner_loop: initial outgoing wave");

    InnerLoopTrace trace;
    trace.variant = cfg.variant;
    trace.final_shadow = b_init;
    const Vec a0 = C.apply(b_init);

    if (cfg.variant == InnerVariant::reduced) {
        Vec u = a0;
        trace.iterates.push_back(u);
        for (int k = 0; k < cfg.budget; ++k) {
            DrStep step = reduced_dr_step(u, S, C);
            const double res = (step.next - u).norm();
            trace.final_shadow = step.shadow;
            trace.shadows.push_back(std::move(step.shadow));
            trace.step_residuals.push_back(res);
            u = std::move(step.next);
            trace.iterates.push_back(u);
            ++trace.steps_used;
            if (res <= cfg.eps) break;
        }
        return trace;
    }

    LiftedWaveState zeta(a0, b_init);
    trace.iterates.push_back(zeta.zeta);
    for (int k = 0; k < cfg.budget; ++k) {
        LiftedDrStep step = lifted_dr_step(zeta, S, C);
        const double res = (step.next.zeta - zeta.zeta).norm();
        trace.final_shadow = step.shadow;
        trace.shadows.push_back(std::move(step.shadow));
        trace.step_residuals.push_back(res);
        zeta = std::move(step.next);
        trace.iterates.push_back(zeta.zeta);
        ++trace.steps_used;
        if (res <= cfg.eps) break;
    }
    // Matched reduced run, only to carry the augmented-storage certificate.
    Vec u = a0;
    trace.certification_iterates.push_back(u);
    for (int k = 0; k < trace.steps_used; ++k) {
        u = reduced_dr_step(u, S, C).next;
        trace.certification_iterates.push_back(u);
    }
    return trace;
}

struct MacroStepRecord {
    std::vector<Vec> states_before;
    std::vector<Vec> states_after;
    std::vector<double> energy_before;
    std::vector<double> energy_after;
    Vec initial_outgoing;  // b^{n,0}
    Vec incident;          // a^n = P bhat*
    Vec outgoing;          // b^{n+1}
    std::vector<PortSample> ports;
    InnerLoopTrace trace;
    std::vector<double> passivity;  // r_i^n
    double supply = 0.0;            // 1/2(|a^n|^2 - |b^{n+1}|^2)
    bool monolithic = false;
    std::string interface_route;    // monolithic only: which solver produced b*

    double total_energy_before() const { return std::accumulate(energy_before.begin(), energy_before.end(), 0.0); }
    double total_energy_after() const { return std::accumulate(energy_after.begin(), energy_after.end(), 0.0); }
};

namespace detail {

/// Advances every subsystem once with its block of the coupled incident wave.
inline MacroStepRecord advance_subsystems(const CoupledSystem& system, std::span<const Vec> states,
                                          const Vec& b_prev, const Vec& incident, bool parallel) {
    const std::size_t count = system.models.size();
    std::vector<StepResult> steps(count);
    auto run = [&](std::size_t i) {
        const auto off = system.offset(i);
        const auto m = system.models[i].port_dim;
        steps[i] = step_with_wave(system.models[i], states[i], incident.segment(off, m), system.scattering,
                                  system.newton);
    };
    if (parallel && count > 1) {
        std::vector<std::future<void>> tasks;
        for (std::size_t i = 1; i < count; ++i) tasks.push_back(std::async(std::launch::async, run, i));
        run(0);
        for (auto& t : tasks) t.get();
    } else {
        for (std::size_t i = 0; i < count; ++i) run(i);
    }

    MacroStepRecord rec;
    rec.initial_outgoing = b_prev;
    rec.incident = incident;
    rec.outgoing = Vec(system.wave_dim());
    for (std::size_t i = 0; i < count; ++i) {
        const auto& model = system.models[i];
        const auto off = system.offset(i);
        const auto m = model.port_dim;
        rec.states_before.push_back(states[i]);
        rec.states_after.push_back(steps[i].next_state);
        rec.energy_before.push_back(model.hamiltonian(states[i]));
        rec.energy_after.push_back(model.hamiltonian(steps[i].next_state));
        rec.outgoing.segment(off, m) = steps[i].outgoing;
        rec.ports.push_back(steps[i].port);
        const Vec a_i = incident.segment(off, m);
        rec.passivity.push_back((rec.energy_after[i] - rec.energy_before[i]) -
                                0.5 * (a_i.squaredNorm() - steps[i].outgoing.squaredNorm()));
    }
    rec.supply = 0.5 * (incident.squaredNorm() - rec.outgoing.squaredNorm());
    return rec;
}

}  // namespace detail

/// One coupled macro-step: inner reconciliation, a^n = P bhat*, one advance per subsystem.
inline MacroStepRecord macro_step(const CoupledSystem& system, std::span<const Vec> states, const Vec& b_prev,
                                  const InnerLoopConfig& cfg) {
    const StackedPortMap S(system, states, cfg.parallel);
    InnerLoopTrace trace = run_inner_loop(S, b_prev, cfg, system.coupling);
    const Vec incident = system.coupling.apply(trace.final_shadow);
    MacroStepRecord rec = detail::advance_subsystems(system, states, b_prev, incident, cfg.parallel);
    rec.trace = std::move(trace);
    return rec;
}

struct DrFixedPointOptions {
    double tol = 1e-13;
    int max_iterations = 100000;
    bool keep_trace = false;
};

struct DrFixedPoint {
    Vec u;           // u^dagger
    Vec shadow;      // S(u^dagger)
    int iterations = 0;
    std::vector<Vec> trace;  // u^0..u^final when keep_trace
};

/// Fixed point of the reduced DR operator by Picard iteration.
template <class PortMap>
DrFixedPoint dr_fixed_point(const PortMap& S, const CouplingStructure& C, const Vec& u_guess,
                            const DrFixedPointOptions& opts = {}) {
    require_size(u_guess, C.dim(), "dr_fixed_point: initial iterate");
    require_finite(u_guess, "dr_fixed_point: initial iterate");
    DrFixedPoint out;
    Vec u = u_guess;
    if (opts.keep_trace) out.trace.push_back(u);
    double diff = std::numeric_limits<double>::infinity();
    while (out.iterations < opts.max_iterations) {
        DrStep step = reduced_dr_step(u, S, C);
        diff = (step.next - u).norm();
        u = std::move(step.next);
        ++out.iterations;
        if (opts.keep_trace) out.trace.push_back(u);
        if (diff <= opts.tol) {
            out.shadow = S(u);
            out.u = std::move(u);
            return out;
        }
    }
    throw SolverFailure("dr_fixed_point: no fixed point within " + std::to_string(opts.max_iterations) +
                            " iterations (last step " + std::to_string(diff) +
                            "); coupling may be near-degenerate",
                        diff);
}

struct InterfaceSolveOptions {
    double tol = 1e-13;  // ||b - S(P b)|| <= tol (1 + ||b||)
    int max_iterations = 50;
    double min_damping = 1.0 / 1048576.0;
    int polish_steps = 3;
};

struct InterfaceSolution {
    Vec b;               // b*, with a* = P b*
    double residual = 0.0;
    int iterations = 0;
    std::string route;   // "newton" or "dr-fallback"
    Vec start;           // initialization that produced b*
};

namespace detail {

template <class PortMap>
std::optional<InterfaceSolution> newton_interface(const PortMap& S, const CouplingStructure& C,
                                                  const Vec& b_guess, const InterfaceSolveOptions& opts) {
    const auto n = C.dim();
    auto g = [&](const Vec& b) -> Vec { return b - S(C.apply(b)); };
    Vec b = b_guess;
    Vec r = g(b);
    double rnorm = r.norm();
    int it = 0;
    auto converged = [&] { return rnorm <= opts.tol * (1.0 + b.norm()); };
    auto direction = [&]() -> Vec {
        Mat jac(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            Vec bp = b;
            const double h = 1e-7 * (1.0 + std::abs(b[j]));
            bp[j] += h;
            jac.col(j) = (g(bp) - r) / h;
        }
        return jac.partialPivLu().solve(-r);
    };
    while (!converged() && it < opts.max_iterations) {
        const Vec db = direction();
        double lambda = 1.0;
        bool accepted = false;
        while (lambda >= opts.min_damping) {
            const Vec trial = b + lambda * db;
            const Vec rt = g(trial);
            if (std::isfinite(rt.norm()) && rt.norm() < rnorm) {
                b = trial;
                r = rt;
                rnorm = rt.norm();
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        ++it;
        if (!accepted) break;
    }
    if (!converged()) return std::nullopt;
    for (int k = 0; k < opts.polish_steps && rnorm > 0.0; ++k) {
        const Vec trial = b + direction();
        const Vec rt = g(trial);
        if (!(rt.norm() < rnorm)) break;
        b = trial;
        r = rt;
        rnorm = rt.norm();
        ++it;
    }
    InterfaceSolution sol;
    sol.b = std::move(b);
    sol.residual = rnorm;
    sol.iterations = it;
    sol.route = "newton";
    sol.start = b_guess;
    return sol;
}

}  // namespace detail

/// Monolithic interface: b* with b* = S(P b*). Damped Newton (finite-difference Jacobian)
/// from b_guess; falls back to reduced DR iterated to 1e-13.
template <class PortMap>
InterfaceSolution monolithic_interface_solve(const PortMap& S, const CouplingStructure& C, const Vec& b_guess,
                                             const InterfaceSolveOptions& opts = {}) {
    require_size(b_guess, C.dim(), "monolithic_interface_solve: guess");
    require_finite(b_guess, "monolithic_interface_solve: guess");
    std::ostringstream attempts;
    try {
        if (auto sol = detail::newton_interface(S, C, b_guess, opts)) return *sol;
        attempts << "newton from b_guess did not converge; ";
    } catch (const SolverFailure& e) {
        attempts << "newton from b_guess hit a subsystem failure (" << e.what() << "); ";
    }
    const Vec u0 = C.apply(b_guess);
    try {
        DrFixedPoint fp = dr_fixed_point(S, C, u0, {opts.tol, 100000, false});
        InterfaceSolution sol;
        sol.b = fp.shadow;
        sol.residual = (sol.b - S(C.apply(sol.b))).norm();
        sol.iterations = fp.iterations;
        sol.route = "dr-fallback";
        sol.start = u0;
        if (sol.residual <= 10.0 * opts.tol * (1.0 + sol.b.norm())) return sol;
        attempts << "dr fallback from u0 = P b_guess stalled at residual " << sol.residual;
    } catch (const SolverFailure& e) {
        attempts << "dr fallback from u0 = P b_guess failed (" << e.what() << ")";
    }
    throw SolverFailure("monolithic_interface_solve: no interface solution; attempts: " + attempts.str(),
                        std::numeric_limits<double>::quiet_NaN());
}

inline InterfaceSolution monolithic_interface_solve(const CoupledSystem& system, std::span<const Vec> states,
                                                    const Vec& b_guess, const InterfaceSolveOptions& opts = {}) {
    const StackedPortMap S(system, states);
    return monolithic_interface_solve(S, system.coupling, b_guess, opts);
}

/// Monolithic reference step: solve the interface exactly, then advance with a* = P b*.
inline MacroStepRecord monolithic_step(const CoupledSystem& system, std::span<const Vec> states,
                                       const Vec& b_guess, const InterfaceSolveOptions& opts = {}) {
    const InterfaceSolution sol = monolithic_interface_solve(system, states, b_guess, opts);
    const Vec incident = system.coupling.apply(sol.b);
    MacroStepRecord rec = detail::advance_subsystems(system, states, b_guess, incident, false);
    rec.monolithic = true;
    rec.interface_route = sol.route;
    rec.trace.final_shadow = sol.b;
    return rec;
}

/// Outgoing waves at n = 0 from each subsystem's zero-input instantaneous port sample.
inline Vec initial_outgoing_waves(const CoupledSystem& system, std::span<const Vec> states) {
    system.validate();
    system.validate_states(states);
    Vec b(system.wave_dim());
    for (std::size_t i = 0; i < system.models.size(); ++i) {
        const PortSample p = zero_input_port(system.models[i], states[i]);
        b.segment(system.offset(i), system.models[i].port_dim) = port_to_wave(p, system.scattering).b;
    }
    return b;
}

}  // namespace phwave
