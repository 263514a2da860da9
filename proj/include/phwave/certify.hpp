#pragma once

#include "phwave/coupling.hpp"
#include "phwave/integrator.hpp"
#include "phwave/linalg.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace phwave {

/// Default pass/fail tolerance for every certificate.
inline constexpr double kCertificateTol = 1e-12;

/// FNE margin <S(alpha) - S(beta), alpha - beta> - ||S(alpha) - S(beta)||^2 (>= 0 iff FNE on the pair).
template <class PortMap>
double fne_margin(const PortMap& S, const Vec& alpha, const Vec& beta) {
    require(alpha.size() == beta.size(), "fne_margin: alpha and beta differ in length");
    const Vec ds = S(alpha) - S(beta);
    return ds.dot(alpha - beta) - ds.squaredNorm();
}

inline double fne_margin_from_images(const Vec& alpha, const Vec& beta, const Vec& s_alpha, const Vec& s_beta) {
    const Vec ds = s_alpha - s_beta;
    return ds.dot(alpha - beta) - ds.squaredNorm();
}

enum class PairOrigin { inner_iterates, perturbation };

struct TestPair {
    std::size_t step = 0;
    std::size_t subsystem = 0;
    PairOrigin origin = PairOrigin::perturbation;
    Vec alpha;
    Vec beta;
    /// Images already known from the run (inner shadows, realized outgoing wave); empty otherwise.
    Vec s_alpha;
    Vec s_beta;
};

struct TestPairSet {
    std::vector<TestPair> pairs;
    std::uint64_t seed = 0;
    int per_step_count = 0;

    std::size_t count() const { return pairs.size(); }
};

/// Test pairs per macro-step and subsystem: consecutive realized inner iterates, plus
/// per_step_count Gaussian perturbations a_i^n + sigma xi paired with a_i^n,
/// sigma = 0.1 (1 + ||a_i^n||). Step n draws from a generator seeded with (seed, n).
inline TestPairSet make_test_pairs(const CoupledSystem& system, std::span<const MacroStepRecord> records,
                                   std::uint64_t seed, int per_step_count = 32) {
    require(per_step_count >= 0, "make_test_pairs: per_step_count must be non-negative");
    TestPairSet set;
    set.seed = seed;
    set.per_step_count = per_step_count;
    for (std::size_t n = 0; n < records.size(); ++n) {
        const MacroStepRecord& rec = records[n];
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal(0.0, 1.0);

        for (std::size_t i = 0; i < system.models.size(); ++i) {
            const auto off = system.offset(i);
            const auto m = system.models[i].port_dim;
            const auto& tr = rec.trace;
            for (std::size_t k = 0; k + 1 < tr.shadows.size(); ++k) {
                TestPair p;
                p.step = n;
                p.subsystem = i;
                p.origin = PairOrigin::inner_iterates;
                p.alpha = tr.incident_at(k).segment(off, m);
                p.beta = tr.incident_at(k + 1).segment(off, m);
                p.s_alpha = tr.shadows[k].segment(off, m);
                p.s_beta = tr.shadows[k + 1].segment(off, m);
                set.pairs.push_back(std::move(p));
            }
            const Vec a = rec.incident.segment(off, m);
            const double sigma = 0.1 * (1.0 + a.norm());
            for (int j = 0; j < per_step_count; ++j) {
                TestPair p;
                p.step = n;
                p.subsystem = i;
                p.origin = PairOrigin::perturbation;
                p.alpha = a;
                for (Eigen::Index c = 0; c < m; ++c) p.alpha[c] += sigma * normal(rng);
                p.beta = a;
                p.s_beta = rec.outgoing.segment(off, m);
                set.pairs.push_back(std::move(p));
            }
        }
    }
    return set;
}

/// r_i^n = (H_i(x^{n+1}) - H_i(x^n)) - 1/2(|a_i^n|^2 - |b_i^{n+1}|^2).
inline double passivity_residual(const CoupledSystem& system, const MacroStepRecord& record, std::size_t i) {
    require(i < system.models.size() && i < record.energy_after.size(), "passivity_residual: bad subsystem index");
    const auto off = system.offset(i);
    const auto m = system.models[i].port_dim;
    return (record.energy_after[i] - record.energy_before[i]) -
           0.5 * (record.incident.segment(off, m).squaredNorm() - record.outgoing.segment(off, m).squaredNorm());
}

/// Residual of the augmented-storage inequality, moved to the left:
///   sum_i dH_i + 1/2|u^K - u+|^2 - 1/2|u^0 - u+|^2 - 1/2(|a^n|^2 - |b^{n+1}|^2).
inline double augmented_storage_residual(const MacroStepRecord& record, const Vec& u_dagger) {
    const auto& us = record.trace.reduced_iterates();
    if (us.empty()) {
        throw ContractViolation(
            "augmented_storage_residual: record has no reduced DR trace; run the reduced variant "
            "or enable the reduced certification trace");
    }
    require_size(u_dagger, us.front().size(), "augmented_storage_residual: u_dagger");
    const double dH = record.total_energy_after() - record.total_energy_before();
    const double fejer = 0.5 * (us.back() - u_dagger).squaredNorm() - 0.5 * (us.front() - u_dagger).squaredNorm();
    return dH + fejer - record.supply;
}

/// max_k (||u^{k+1} - u+|| - ||u^k - u+||) over the reduced trace; -inf if it has no steps.
inline double fejer_max_increase(const MacroStepRecord& record, const Vec& u_dagger) {
    const auto& us = record.trace.reduced_iterates();
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < us.size(); ++k) {
        worst = std::max(worst, (us[k + 1] - u_dagger).norm() - (us[k] - u_dagger).norm());
    }
    return worst;
}

/// u+ at the macro-step of `record`: Newton interface solve warm-started at b^{n,0},
/// then Picard-polished on the DR operator from u = P b*.
inline DrFixedPoint fixed_point_oracle(const CoupledSystem& system, const MacroStepRecord& record,
                                       const DrFixedPointOptions& opts = {}) {
    const StackedPortMap S(system, record.states_before);
    const InterfaceSolution sol = monolithic_interface_solve(S, system.coupling, record.initial_outgoing);
    return dr_fixed_point(S, system.coupling, system.coupling.apply(sol.b), opts);
}

struct GammaRuleReport {
    double lambda_min = 0.0;
    bool pass = false;
    Vec wave_spectrum;  // (lambda - gamma) / (lambda + gamma), ascending
    bool symmetrized = false;
    double asymmetry = 0.0;
};

/// Sufficient impedance rule: Z >= gamma I implies the induced wave map is FNE.
inline GammaRuleReport gamma_rule_check(const Mat& Z, double gamma) {
    require(Z.rows() == Z.cols() && Z.rows() > 0, "gamma_rule_check: Z must be square");
    require(Z.allFinite(), "gamma_rule_check: Z has non-finite entries");
    require(std::isfinite(gamma) && gamma > 0.0, "gamma_rule_check: gamma must be positive");
    GammaRuleReport r;
    r.asymmetry = (Z - Z.transpose()).norm();
    r.symmetrized = r.asymmetry > 1e-10;
    const Mat sym = 0.5 * (Z + Z.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(sym, Eigen::EigenvaluesOnly);
    const Vec& lambda = eig.eigenvalues();
    r.lambda_min = lambda.minCoeff();
    r.pass = r.lambda_min >= gamma;
    r.wave_spectrum = (lambda.array() - gamma) / (lambda.array() + gamma);
    if (r.pass && (r.wave_spectrum.minCoeff() < 0.0 || r.wave_spectrum.maxCoeff() > 1.0)) {
        throw std::logic_error("gamma_rule_check: wave spectrum outside [0,1] despite Z >= gamma I");
    }
    return r;
}

/// Discrete incremental impedance Z (delta e = Z delta f) of the frozen one-step relation,
/// by central differences around the input of base_port, symmetrized.
inline Mat estimate_discrete_impedance(const SubsystemModel& model, const Vec& x_frozen,
                                       const ScatteringConfig& scat, const PortSample& base_port,
                                       const NewtonOptions& newton = {}) {
    const auto [u0_ref, y0_ref] = input_output(model, base_port);
    const Vec u0 = u0_ref;
    require_size(u0, model.port_dim, "estimate_discrete_impedance: base port");
    const auto m = model.port_dim;
    Mat dy(m, m);
    for (int j = 0; j < m; ++j) {
        const double h = 1e-6 * (1.0 + std::abs(u0[j]));
        Vec up = u0;
        Vec um = u0;
        up[j] += h;
        um[j] -= h;
        const StepResult sp = step_with_input(model, x_frozen, up, scat, newton);
        const StepResult sm = step_with_input(model, x_frozen, um, scat, newton);
        const Vec yp = input_output(model, sp.port).second;
        const Vec ym = input_output(model, sm.port).second;
        dy.col(j) = (yp - ym) / (2.0 * h);
    }
    Mat Z = model.causality == Causality::flow_in ? dy : Mat(dy.inverse());
    return 0.5 * (Z + Z.transpose());
}

struct CertifyOptions {
    std::uint64_t seed = 20260116;
    int per_step_count = 32;
    double tol = kCertificateTol;
    bool fne = true;
    bool augmented = true;
};

struct CertificateReport {
    double tol = kCertificateTol;
    std::size_t pair_count = 0;
    // [step][subsystem]
    std::vector<std::vector<double>> fne_min;
    std::vector<std::vector<std::size_t>> fne_argmin;  // index into the test pair set
    std::vector<std::vector<int>> fne_violations;
    std::vector<std::vector<double>> passivity;
    // [step]
    std::vector<double> augmented;
    std::vector<double> fejer_increase;

    double min_fne_margin = std::numeric_limits<double>::infinity();
    int total_fne_violations = 0;
    double max_passivity = -std::numeric_limits<double>::infinity();
    double max_augmented = -std::numeric_limits<double>::infinity();
    double max_fejer_increase = -std::numeric_limits<double>::infinity();

    double max_pos_passivity() const { return positive_part(max_passivity); }
    double max_pos_augmented() const { return positive_part(max_augmented); }

    bool passivity_ok() const { return max_pos_passivity() <= tol; }
    bool augmented_ok() const { return max_pos_augmented() <= tol; }
    bool fne_ok() const { return total_fne_violations == 0; }
    bool passed() const { return passivity_ok() && augmented_ok() && fne_ok(); }
};

/// Recomputes every certificate over a run of macro-step records.
inline CertificateReport certify_run(const CoupledSystem& system, std::span<const MacroStepRecord> records,
                                     const CertifyOptions& opts = {}) {
    CertificateReport rep;
    rep.tol = opts.tol;
    const std::size_t nsub = system.models.size();
    const std::size_t steps = records.size();
    rep.passivity.assign(steps, std::vector<double>(nsub, 0.0));

    for (std::size_t n = 0; n < steps; ++n) {
        for (std::size_t i = 0; i < nsub; ++i) {
            const double r = passivity_residual(system, records[n], i);
            rep.passivity[n][i] = r;
            rep.max_passivity = std::max(rep.max_passivity, r);
        }
    }

    if (opts.augmented) {
        rep.augmented.assign(steps, 0.0);
        rep.fejer_increase.assign(steps, -std::numeric_limits<double>::infinity());
        for (std::size_t n = 0; n < steps; ++n) {
            const DrFixedPoint fp = fixed_point_oracle(system, records[n]);
            rep.augmented[n] = augmented_storage_residual(records[n], fp.u);
            rep.fejer_increase[n] = fejer_max_increase(records[n], fp.u);
            rep.max_augmented = std::max(rep.max_augmented, rep.augmented[n]);
            rep.max_fejer_increase = std::max(rep.max_fejer_increase, rep.fejer_increase[n]);
        }
    }

    if (opts.fne) {
        rep.fne_min.assign(steps, std::vector<double>(nsub, std::numeric_limits<double>::infinity()));
        rep.fne_argmin.assign(steps, std::vector<std::size_t>(nsub, 0));
        rep.fne_violations.assign(steps, std::vector<int>(nsub, 0));
        const TestPairSet set = make_test_pairs(system, records, opts.seed, opts.per_step_count);
        rep.pair_count = set.count();
        for (std::size_t p = 0; p < set.pairs.size(); ++p) {
            const TestPair& tp = set.pairs[p];
            const MacroStepRecord& rec = records[tp.step];
            auto image = [&](const Vec& cached, const Vec& arg) -> Vec {
                if (cached.size() > 0) return cached;
                return frozen_port_map(system.models[tp.subsystem], rec.states_before[tp.subsystem], arg,
                                       system.scattering, system.newton);
            };
            const double margin = fne_margin_from_images(tp.alpha, tp.beta, image(tp.s_alpha, tp.alpha),
                                                         image(tp.s_beta, tp.beta));
            double& best = rep.fne_min[tp.step][tp.subsystem];
            if (margin < best) {
                best = margin;
                rep.fne_argmin[tp.step][tp.subsystem] = p;
            }
            if (margin < -opts.tol) {
                ++rep.fne_violations[tp.step][tp.subsystem];
                ++rep.total_fne_violations;
            }
            rep.min_fne_margin = std::min(rep.min_fne_margin, margin);
        }
    }
    return rep;
}

}  // namespace phwave
