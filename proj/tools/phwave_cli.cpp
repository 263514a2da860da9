// phwave: run, sweep, certify and compare the two-oscillator benchmark.
//
// Exit codes: 0 success (all certificates pass), 1 usage or input error,
// 2 solver failure, 3 certificate violation beyond tolerance.

#include "phwave/bench/csv.hpp"
#include "phwave/bench/sweep.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace phwave;
using namespace phwave::bench;

namespace {

enum Exit { kOk = 0, kUsage = 1, kSolver = 2, kCertificate = 3 };

struct CommonArgs {
    std::string config = "table1";
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<double> eps;
    std::string variant = "reduced";
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

BenchmarkConfig resolve_config(const CommonArgs& a) {
    BenchmarkConfig cfg = load_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    if (a.eps) cfg.eps = *a.eps;
    cfg.validate();
    return cfg;
}

InnerVariant resolve_variant(const std::string& v) { return v == "lifted" ? InnerVariant::lifted : InnerVariant::reduced; }

fs::path prepare_out(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw UsageError("cannot create output directory '" + dir + "': " + ec.message());
    return p;
}

void write_file(const fs::path& path, const auto& writer) {
    std::ofstream f(path);
    if (!f) throw UsageError("cannot write '" + path.string() + "'");
    writer(f);
}

/// Worst certificate entries, printed on violation.
void print_report(std::ostream& os, const std::string& label, const CertificateReport& r) {
    os << label << ": max (r)+ = " << fmt(r.max_pos_passivity()) << ", max aug+ = " << fmt(r.max_pos_augmented())
       << ", min FNE margin = " << fmt(r.min_fne_margin) << " (" << r.total_fne_violations << " of "
       << r.pair_count << " pairs below -tol)";
    if (!r.passed()) os << "  [VIOLATION, tol " << fmt(r.tol) << "]";
    os << "\n";
}

void print_worst_margin(std::ostream& os, const CertificateReport& r) {
    double worst = std::numeric_limits<double>::infinity();
    std::size_t ws = 0, wi = 0;
    for (std::size_t n = 0; n < r.fne_min.size(); ++n)
        for (std::size_t i = 0; i < r.fne_min[n].size(); ++i)
            if (r.fne_min[n][i] < worst) {
                worst = r.fne_min[n][i];
                ws = n;
                wi = i;
            }
    os << "certificate violation: worst FNE margin " << fmt(worst) << " at macro-step " << ws << ", subsystem "
       << (wi == 0 ? "A" : "B") << "; worst passivity residual " << fmt(r.max_passivity)
       << "; worst augmented residual " << (r.augmented.empty() ? std::string("n/a") : fmt(r.max_augmented)) << "\n";
}

int cmd_run(const CommonArgs& a, std::optional<int> budget, bool monolithic) {
    if (monolithic == budget.has_value()) throw UsageError("run: give exactly one of --budget or --monolithic");
    const BenchmarkConfig cfg = resolve_config(a);
    const fs::path out = prepare_out(a.out);
    const CoupledSystem system = build_benchmark(cfg);

    if (monolithic) {
        const Trajectory traj = run_monolithic(cfg);
        CertifyOptions o = certify_options_for(cfg);
        o.augmented = false;
        const CertificateReport rep = certify_run(system, traj.steps, o);
        const fs::path file = out / "trajectory_monolithic.csv";
        write_file(file, [&](std::ostream& f) { write_trajectory_csv(f, make_rows(cfg, traj)); });
        print_report(std::cout, "monolithic", rep);
        std::cout << "wrote " << file.string() << "\n";
        if (!rep.passed()) {
            print_worst_margin(std::cerr, rep);
            return kCertificate;
        }
        return kOk;
    }

    if (*budget < 0) throw UsageError("run: --budget must be non-negative");
    const Trajectory traj = run_budget(cfg, *budget, resolve_variant(a.variant));
    const CertificateReport rep = certify_run(system, traj.steps, certify_options_for(cfg));
    const fs::path file = out / ("trajectory_K" + std::to_string(*budget) + ".csv");
    write_file(file, [&](std::ostream& f) { write_trajectory_csv(f, make_rows(cfg, traj, &rep)); });
    print_report(std::cout, traj.provenance, rep);
    std::cout << "wrote " << file.string() << "\n";
    if (!rep.passed()) {
        print_worst_margin(std::cerr, rep);
        return kCertificate;
    }
    return kOk;
}

int cmd_sweep(const CommonArgs& a, bool concurrent) {
    const BenchmarkConfig cfg = resolve_config(a);
    const fs::path out = prepare_out(a.out);
    SweepOptions opts;
    opts.variant = resolve_variant(a.variant);
    opts.concurrent_budgets = concurrent;
    const SweepReport rep = sweep(cfg, opts);

    write_file(out / "trajectory_monolithic.csv",
               [&](std::ostream& f) { write_trajectory_csv(f, make_rows(cfg, rep.reference)); });
    for (const auto& b : rep.budgets) {
        if (!b.ok) continue;
        write_file(out / ("trajectory_K" + std::to_string(b.budget) + ".csv"), [&](std::ostream& f) {
            write_trajectory_csv(f, make_rows(cfg, *b.trajectory, &*b.certificates));
        });
    }
    write_file(out / "sweep_summary.csv", [&](std::ostream& f) { write_summary_csv(f, rep); });
    write_file(out / "sweep_plot.csv", [&](std::ostream& f) { write_plot_csv(f, rep); });

    int code = kOk;
    const CertificateReport* worst = nullptr;
    for (const auto& b : rep.budgets) {
        if (!b.ok) {
            std::cerr << "K=" << b.budget << ": " << b.error << "\n";
            code = kSolver;
            continue;
        }
        print_report(std::cout, "K=" + std::to_string(b.budget) + " rms=" + fmt(b.error_vs_reference.rms),
                     *b.certificates);
        if (!b.certificates->passed() && (!worst || b.certificates->min_fne_margin < worst->min_fne_margin)) {
            worst = &*b.certificates;
        }
    }
    std::cout << "sweep finished in " << fmt(rep.seconds) << " s; results in " << out.string() << "\n";
    if (code == kOk && worst) {
        print_worst_margin(std::cerr, *worst);
        code = kCertificate;
    }
    return code;
}

/// Rebuilds the macro-step records of a stored trajectory: every row's state is the frozen
/// state, the inner loop is replayed with the recorded inner_steps_used, and the step is redone.
int cmd_certify(const CommonArgs& a, const std::string& file) {
    const BenchmarkConfig cfg = resolve_config(a);
    std::ifstream in(file);
    if (!in) throw UsageError("cannot open trajectory file '" + file + "'");
    const std::vector<TrajectoryRow> rows = read_trajectory_csv(in);
    if (rows.size() < 2) throw UsageError("certify: trajectory '" + file + "' has fewer than two rows");
    const CoupledSystem system = build_benchmark(cfg);

    std::vector<MacroStepRecord> records;
    records.reserve(rows.size() - 1);
    double incident_mismatch = 0.0;
    for (std::size_t n = 0; n + 1 < rows.size(); ++n) {
        const TrajectoryRow& r = rows[n];
        const std::vector<Vec> x = states_from_sample(cfg, {r.q1, r.v1, r.q2, r.v2, r.s});
        const Vec b = Eigen::Vector2d(r.b_A, r.b_B);
        const InnerLoopConfig inner{r.inner_steps_used, cfg.eps, resolve_variant(a.variant), false};
        MacroStepRecord rec = macro_step(system, x, b, inner);
        if (std::isfinite(r.a_A)) {
            incident_mismatch = std::max(incident_mismatch, (rec.incident - Eigen::Vector2d(r.a_A, r.a_B)).norm());
        }
        records.push_back(std::move(rec));
    }
    const CertificateReport rep = certify_run(system, records, certify_options_for(cfg));
    print_report(std::cout, file, rep);
    std::cout << "replayed " << records.size() << " macro-steps; max |a - a_stored| = " << fmt(incident_mismatch)
              << "\n";
    if (!rep.passed()) {
        print_worst_margin(std::cerr, rep);
        return kCertificate;
    }
    return kOk;
}

int cmd_compare(const std::string& lhs, const std::string& rhs) {
    auto load = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open trajectory file '" + path + "'");
        return read_trajectory_csv(in);
    };
    const auto a = load(lhs);
    const auto b = load(rhs);
    if (a.size() != b.size()) throw UsageError("compare: grids differ in length");
    for (std::size_t n = 0; n < a.size(); ++n) {
        if (std::abs(a[n].t - b[n].t) > 1e-12 * (1.0 + std::abs(b[n].t))) {
            throw UsageError("compare: time grids differ at row " + std::to_string(n));
        }
    }
    const RmsError e = rms_state_error(samples_of(a), samples_of(b));
    char buf[80];
    std::snprintf(buf, sizeof buf, "%.17g", e.rms);
    std::cout << "rms = " << buf;
    std::snprintf(buf, sizeof buf, "%.17g", e.terminal);
    std::cout << "\nterminal = " << buf << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scattering-domain iterative coupling: two-oscillator benchmark"};
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&](CLI::App* sub, bool with_out) {
        sub->add_option("--config", common.config, "config file or profile name (table1)");
        if (with_out) sub->add_option("--out", common.out, "output directory");
        sub->add_option("--seed", common.seed, "seed for FNE test pairs");
        sub->add_option("--eps", common.eps, "inner-loop tolerance");
        sub->add_option("--variant", common.variant, "inner iteration")->check(CLI::IsMember({"reduced", "lifted"}));
    };

    std::optional<int> budget;
    bool monolithic = false;
    auto* run = app.add_subcommand("run", "one budget or the monolithic reference");
    add_common(run, true);
    run->add_option("--budget", budget, "inner budget K");
    run->add_flag("--monolithic", monolithic, "exact interface solve every step");

    bool concurrent = false;
    auto* sw = app.add_subcommand("sweep", "monolithic reference plus every budget of the config");
    add_common(sw, true);
    sw->add_flag("--jobs", concurrent, "run budgets concurrently");

    std::string certify_file;
    auto* cert = app.add_subcommand("certify", "recompute certificates from a stored trajectory");
    add_common(cert, false);
    cert->add_option("trajectory", certify_file, "trajectory CSV")->required();

    std::string lhs, rhs;
    auto* cmp = app.add_subcommand("compare", "RMS state error between two trajectory files");
    cmp->add_option("trajectory", lhs, "trajectory CSV")->required();
    cmp->add_option("reference", rhs, "reference CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*run) return cmd_run(common, budget, monolithic);
        if (*sw) return cmd_sweep(common, concurrent);
        if (*cert) return cmd_certify(common, certify_file);
        return cmd_compare(lhs, rhs);
    } catch (const SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
}
