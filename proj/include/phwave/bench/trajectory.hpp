#pragma once

#include "phwave/bench/benchmark.hpp"
#include "phwave/bench/config.hpp"
#include "phwave/coupling.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace phwave::bench {

struct Trajectory {
    std::vector<double> time;                  // t_0 .. t_N
    std::vector<std::vector<Vec>> states;      // per grid point
    std::vector<BenchmarkSample> samples;      // per grid point
    std::vector<Vec> outgoing;                 // b^n per grid point (b^0 = initialization)
    std::vector<double> total_energy;          // per grid point
    std::vector<MacroStepRecord> steps;        // N records
    std::string provenance;                    // "K=<budget>" or "monolithic"
    int budget = -1;                           // -1 for monolithic
    std::uint64_t config_hash = 0;
};

namespace detail {

template <class StepFn>
Trajectory integrate(const BenchmarkConfig& cfg, std::string provenance, int budget, StepFn&& step) {
    const CoupledSystem system = build_benchmark(cfg);
    const long n_steps = cfg.steps();

    Trajectory traj;
    traj.provenance = std::move(provenance);
    traj.budget = budget;
    traj.config_hash = config_hash(cfg);
    traj.time.reserve(n_steps + 1);
    traj.steps.reserve(n_steps);

    std::vector<Vec> states = initial_states(cfg);
    Vec b = initial_outgoing_waves(system, states);
    auto record_point = [&](long n) {
        traj.time.push_back(static_cast<double>(n) * cfg.dt);
        traj.states.push_back(states);
        traj.samples.push_back(observe(cfg, states));
        traj.outgoing.push_back(b);
        double e = 0.0;
        for (std::size_t i = 0; i < states.size(); ++i) e += system.models[i].hamiltonian(states[i]);
        traj.total_energy.push_back(e);
    };
    record_point(0);
    for (long n = 0; n < n_steps; ++n) {
        MacroStepRecord rec;
        try {
            rec = step(system, states, b);
        } catch (const SolverFailure& e) {
            throw SolverFailure(traj.provenance + ": macro-step " + std::to_string(n) + ": " + e.what(),
                                e.last_residual());
        }
        states = rec.states_after;
        b = rec.outgoing;
        traj.steps.push_back(std::move(rec));
        record_point(n + 1);
    }
    return traj;
}

}  // namespace detail

/// Partitioned run with a fixed inner budget K per macro-step.
inline Trajectory run_budget(const BenchmarkConfig& cfg, int budget,
                             InnerVariant variant = InnerVariant::reduced, bool parallel = false) {
    cfg.validate();
    const InnerLoopConfig inner{budget, cfg.eps, variant, parallel};
    inner.validate();
    return detail::integrate(cfg, "K=" + std::to_string(budget), budget,
                             [&](const CoupledSystem& sys, const std::vector<Vec>& x, const Vec& b) {
                                 return macro_step(sys, x, b, inner);
                             });
}

/// Reference run: exact interface solve at every macro-step, same integrator and dt.
inline Trajectory run_monolithic(const BenchmarkConfig& cfg) {
    cfg.validate();
    return detail::integrate(cfg, "monolithic", -1,
                             [](const CoupledSystem& sys, const std::vector<Vec>& x, const Vec& b) {
                                 return monolithic_step(sys, x, b);
                             });
}

struct RmsError {
    double rms = 0.0;       // root-mean-square over the grid
    double terminal = 0.0;  // error at the final grid point
    std::vector<double> series;
};

/// Per-time error is the Euclidean norm of the (q1, v1, q2, v2) difference; s is excluded.
inline RmsError rms_state_error(const std::vector<BenchmarkSample>& traj, const std::vector<BenchmarkSample>& ref) {
    require(traj.size() == ref.size() && !traj.empty(), "rms_state_error: grids differ");
    RmsError out;
    out.series.reserve(traj.size());
    double acc = 0.0;
    for (std::size_t n = 0; n < traj.size(); ++n) {
        const double dq1 = traj[n].q1 - ref[n].q1;
        const double dv1 = traj[n].v1 - ref[n].v1;
        const double dq2 = traj[n].q2 - ref[n].q2;
        const double dv2 = traj[n].v2 - ref[n].v2;
        const double e = std::sqrt(dq1 * dq1 + dv1 * dv1 + dq2 * dq2 + dv2 * dv2);
        out.series.push_back(e);
        acc += e * e;
    }
    out.rms = std::sqrt(acc / static_cast<double>(traj.size()));
    out.terminal = out.series.back();
    return out;
}

inline RmsError rms_state_error(const Trajectory& traj, const Trajectory& ref) {
    require(traj.time.size() == ref.time.size(), "rms_state_error: grids differ in length");
    for (std::size_t n = 0; n < traj.time.size(); ++n) {
        require(std::abs(traj.time[n] - ref.time[n]) <= 1e-12 * (1.0 + std::abs(ref.time[n])),
                "rms_state_error: time grids differ");
    }
    return rms_state_error(traj.samples, ref.samples);
}

}  // namespace phwave::bench
