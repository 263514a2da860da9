#pragma once

#include "phwave/bench/trajectory.hpp"
#include "phwave/certify.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace phwave::bench {

/// One grid point of a trajectory file.
///
/// Row n holds the state at t_n and b^n (outgoing wave at t_n). The step quantities a^n, r^n,
/// the augmented residual and inner_steps_used describe the macro-step t_n -> t_{n+1};
/// they are NaN (and 0 steps) on the final row.
struct TrajectoryRow {
    double t = 0.0;
    double q1 = 0.0, v1 = 0.0, q2 = 0.0, v2 = 0.0, s = 0.0;
    double H_A = 0.0, H_B = 0.0, H_total = 0.0;
    double a_A = 0.0, a_B = 0.0, b_A = 0.0, b_B = 0.0;
    double r_A = 0.0, r_B = 0.0, aug_residual = 0.0;
    int inner_steps_used = 0;
};

inline constexpr const char* kTrajectoryHeader =
    "t,q1,v1,q2,v2,s,H_A,H_B,H_total,a_A,a_B,b_A,b_B,r_A,r_B,aug_residual,inner_steps_used";

/// Flattens a run; certificate values come from `report` when given (NaN otherwise).
inline std::vector<TrajectoryRow> make_rows(const BenchmarkConfig& cfg, const Trajectory& traj,
                                            const CertificateReport* report = nullptr) {
    const CoupledSystem system = build_benchmark(cfg);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<TrajectoryRow> rows;
    rows.reserve(traj.time.size());
    for (std::size_t n = 0; n < traj.time.size(); ++n) {
        TrajectoryRow r;
        r.t = traj.time[n];
        const auto& smp = traj.samples[n];
        r.q1 = smp.q1;
        r.v1 = smp.v1;
        r.q2 = smp.q2;
        r.v2 = smp.v2;
        r.s = smp.s;
        r.H_A = system.models[0].hamiltonian(traj.states[n][0]);
        r.H_B = system.models[1].hamiltonian(traj.states[n][1]);
        r.H_total = traj.total_energy[n];
        r.b_A = traj.outgoing[n][0];
        r.b_B = traj.outgoing[n][1];
        if (n < traj.steps.size()) {
            const MacroStepRecord& rec = traj.steps[n];
            r.a_A = rec.incident[0];
            r.a_B = rec.incident[1];
            r.r_A = rec.passivity[0];
            r.r_B = rec.passivity[1];
            r.aug_residual = (report && n < report->augmented.size()) ? report->augmented[n] : nan;
            r.inner_steps_used = rec.trace.steps_used;
        } else {
            r.a_A = r.a_B = r.r_A = r.r_B = r.aug_residual = nan;
            r.inner_steps_used = 0;
        }
        rows.push_back(r);
    }
    return rows;
}

namespace detail {

/// 17 significant digits: every double survives a write/read cycle bit-exactly.
inline void put(std::ostream& out, double v) {
    if (std::isnan(v)) {
        out << "nan";
        return;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

inline double take_double(const std::string& field, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size()) {
        throw std::runtime_error("trajectory csv line " + std::to_string(line) + ": bad number '" + field + "'");
    }
    return v;
}

}  // namespace detail

inline void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
    out << kTrajectoryHeader << "\n";
    for (const auto& r : rows) {
        for (double v : {r.t, r.q1, r.v1, r.q2, r.v2, r.s, r.H_A, r.H_B, r.H_total, r.a_A, r.a_B, r.b_A, r.b_B,
                         r.r_A, r.r_B, r.aug_residual}) {
            detail::put(out, v);
            out << ',';
        }
        out << r.inner_steps_used << "\n";
    }
}

inline std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("trajectory csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTrajectoryHeader) throw std::runtime_error("trajectory csv: unexpected header");
    std::vector<TrajectoryRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 17) {
            throw std::runtime_error("trajectory csv line " + std::to_string(lineno) + ": expected 17 fields");
        }
        TrajectoryRow r;
        double* slots[] = {&r.t,   &r.q1,  &r.v1,  &r.q2,  &r.v2,  &r.s,   &r.H_A, &r.H_B,
                           &r.H_total, &r.a_A, &r.a_B, &r.b_A, &r.b_B, &r.r_A, &r.r_B, &r.aug_residual};
        for (std::size_t i = 0; i < 16; ++i) *slots[i] = detail::take_double(fields[i], lineno);
        try {
            std::size_t used = 0;
            r.inner_steps_used = std::stoi(fields[16], &used);
            if (used != fields[16].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw std::runtime_error("trajectory csv line " + std::to_string(lineno) + ": bad inner_steps_used");
        }
        rows.push_back(r);
    }
    return rows;
}

inline std::vector<BenchmarkSample> samples_of(const std::vector<TrajectoryRow>& rows) {
    std::vector<BenchmarkSample> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back({r.q1, r.v1, r.q2, r.v2, r.s});
    return out;
}

}  // namespace phwave::bench
