#pragma once

#include "phwave/bench/csv.hpp"
#include "phwave/bench/trajectory.hpp"
#include "phwave/certify.hpp"

#include <chrono>
#include <future>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace phwave::bench {

struct SweepOptions {
    InnerVariant variant = InnerVariant::reduced;
    bool parallel_subsystems = false;
    /// Budgets run concurrently when true. Each run stays deterministic.
    bool concurrent_budgets = false;
    int per_step_count = 32;
};

struct BudgetResult {
    int budget = 0;
    bool ok = false;
    std::string error;  // solver failure message when !ok
    std::optional<Trajectory> trajectory;
    std::optional<CertificateReport> certificates;
    RmsError error_vs_reference;
    double seconds = 0.0;
};

struct SweepReport {
    BenchmarkConfig config;
    Trajectory reference;
    std::vector<BudgetResult> budgets;
    double seconds = 0.0;

    bool all_ran() const {
        for (const auto& b : budgets)
            if (!b.ok) return false;
        return true;
    }
    bool all_certified() const {
        for (const auto& b : budgets)
            if (!b.ok || !b.certificates->passed()) return false;
        return true;
    }
};

inline CertifyOptions certify_options_for(const BenchmarkConfig& cfg, int per_step_count = 32) {
    CertifyOptions o;
    o.seed = cfg.seed;
    o.per_step_count = per_step_count;
    return o;
}

inline BudgetResult run_and_certify(const BenchmarkConfig& cfg, int budget, const Trajectory& reference,
                                    const SweepOptions& opts = {}) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    BudgetResult out;
    out.budget = budget;
    try {
        Trajectory traj = run_budget(cfg, budget, opts.variant, opts.parallel_subsystems);
        const CoupledSystem system = build_benchmark(cfg);
        out.certificates = certify_run(system, traj.steps, certify_options_for(cfg, opts.per_step_count));
        out.error_vs_reference = rms_state_error(traj, reference);
        out.trajectory = std::move(traj);
        out.ok = true;
    } catch (const SolverFailure& e) {
        out.error = e.what();
    }
    out.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    return out;
}

/// Monolithic reference once, then every budget of the config.
/// A solver failure in one budget is kept in its row; the others still run.
inline SweepReport sweep(const BenchmarkConfig& cfg, const SweepOptions& opts = {}) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    SweepReport rep;
    rep.config = cfg;
    rep.reference = run_monolithic(cfg);
    if (opts.concurrent_budgets) {
        std::vector<std::future<BudgetResult>> jobs;
        for (int k : cfg.budgets) {
            jobs.push_back(std::async(std::launch::async,
                                      [&, k] { return run_and_certify(cfg, k, rep.reference, opts); }));
        }
        for (auto& j : jobs) rep.budgets.push_back(j.get());
    } else {
        for (int k : cfg.budgets) rep.budgets.push_back(run_and_certify(cfg, k, rep.reference, opts));
    }
    rep.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    return rep;
}

inline constexpr const char* kSummaryHeader =
    "budget,rms,terminal_error,min_fne_margin,fne_violations,max_pos_passivity,max_pos_aug,status";

inline void write_summary_csv(std::ostream& out, const SweepReport& rep) {
    out << kSummaryHeader << "\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& b : rep.budgets) {
        out << b.budget << ',';
        const bool have = b.ok;
        detail::put(out, have ? b.error_vs_reference.rms : nan);
        out << ',';
        detail::put(out, have ? b.error_vs_reference.terminal : nan);
        out << ',';
        detail::put(out, have ? b.certificates->min_fne_margin : nan);
        out << ',' << (have ? b.certificates->total_fne_violations : 0) << ',';
        detail::put(out, have ? b.certificates->max_pos_passivity() : nan);
        out << ',';
        detail::put(out, have ? b.certificates->max_pos_augmented() : nan);
        out << ',' << (!have ? "solver_failure" : b.certificates->passed() ? "certified" : "violation") << "\n";
    }
}

/// Long format for plotting: one value per line, keyed by series and quantity.
///   series = monolithic | K=<k>; quantity in {q1, q2, error} over t, and per-budget summary rows
///   (t empty) for rms, min_fne_margin, max_pos_passivity, max_pos_aug.
inline void write_plot_csv(std::ostream& out, const SweepReport& rep) {
    out << "series,budget,t,quantity,value\n";
    auto row = [&](const std::string& series, int budget, double t, const char* q, double v) {
        out << series << ',' << budget << ',';
        if (!std::isnan(t)) detail::put(out, t);
        out << ',' << q << ',';
        detail::put(out, v);
        out << '\n';
    };
    const double none = std::numeric_limits<double>::quiet_NaN();
    const Trajectory& ref = rep.reference;
    for (std::size_t n = 0; n < ref.time.size(); ++n) {
        row("monolithic", -1, ref.time[n], "q1", ref.samples[n].q1);
        row("monolithic", -1, ref.time[n], "q2", ref.samples[n].q2);
    }
    for (const auto& b : rep.budgets) {
        if (!b.ok) continue;
        const std::string series = "K=" + std::to_string(b.budget);
        const Trajectory& tr = *b.trajectory;
        for (std::size_t n = 0; n < tr.time.size(); ++n) {
            row(series, b.budget, tr.time[n], "q1", tr.samples[n].q1);
            row(series, b.budget, tr.time[n], "q2", tr.samples[n].q2);
            row(series, b.budget, tr.time[n], "error", b.error_vs_reference.series[n]);
        }
        row(series, b.budget, none, "rms", b.error_vs_reference.rms);
        row(series, b.budget, none, "min_fne_margin", b.certificates->min_fne_margin);
        row(series, b.budget, none, "max_pos_passivity", b.certificates->max_pos_passivity());
        row(series, b.budget, none, "max_pos_aug", b.certificates->max_pos_augmented());
    }
}

}  // namespace phwave::bench
