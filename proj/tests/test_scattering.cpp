#include "catch_amalgamated.hpp"
#include "oracles.hpp"

using namespace phwave;
using Catch::Matchers::WithinAbs;

namespace {

PortSample port(double e, double f) { return {Vec::Constant(1, e), Vec::Constant(1, f)}; }

}  // namespace

TEST_CASE("port to wave on the worked example", "[scattering]") {
    const ScatteringConfig cfg{0.5, 1.0};
    const WavePair w = port_to_wave(port(2.0, 2.0), cfg);
    // sqrt(1/(2*0.5)) * (2 +- 0.5*2)
    CHECK_THAT(w.a[0], WithinAbs(3.0, 1e-15));
    CHECK_THAT(w.b[0], WithinAbs(1.0, 1e-15));
    CHECK_THAT(wave_power(w), WithinAbs(cfg.dt * 2.0 * 2.0, 1e-14));

    const PortSample p = wave_to_port(WavePair{Vec::Constant(1, 3.0), Vec::Constant(1, 1.0)}, cfg);
    CHECK_THAT(p.effort[0], WithinAbs(2.0, 1e-15));
    CHECK_THAT(p.flow[0], WithinAbs(2.0, 1e-15));
}

TEST_CASE("zero port and zero waves map to each other", "[scattering]") {
    const ScatteringConfig cfg{0.4, 0.01};
    const WavePair w = port_to_wave(port(0.0, 0.0), cfg);
    CHECK(w.a.norm() == 0.0);
    CHECK(w.b.norm() == 0.0);
    const PortSample p = wave_to_port(WavePair{Vec::Zero(2), Vec::Zero(2)}, cfg);
    CHECK(p.effort.norm() == 0.0);
    CHECK(p.flow.norm() == 0.0);
}

TEST_CASE("wave transform round trip and power identity", "[scattering][property]") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> pos(0.05, 5.0);
    double worst_trip = 0.0, worst_power = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const ScatteringConfig cfg{pos(rng), pos(rng) * 0.01};
        const PortSample p{oracle::random_vec(rng, 3, 10.0), oracle::random_vec(rng, 3, 10.0)};
        const WavePair w = port_to_wave(p, cfg);
        const PortSample q = wave_to_port(w, cfg);
        worst_trip = std::max(worst_trip, (q.effort - p.effort).norm() / p.effort.norm());
        worst_trip = std::max(worst_trip, (q.flow - p.flow).norm() / p.flow.norm());
        const double pw = cfg.dt * p.power();
        worst_power = std::max(worst_power, std::abs(wave_power(w) - pw) / (1.0 + std::abs(pw)));
    }
    CHECK(worst_trip <= 1e-14);
    CHECK(worst_power <= 1e-13);
}

TEST_CASE("wave power examples", "[scattering]") {
    CHECK(wave_power(Vec::Constant(1, 3.0), Vec::Constant(1, 1.0)) == 4.0);
    std::mt19937_64 rng(5);
    const Vec b = oracle::random_vec(rng, 2);
    CHECK(wave_power(b, b) == 0.0);
    const CouplingStructure C = CouplingStructure::swap(1);
    CHECK_THAT(wave_power(C.apply(b), b), WithinAbs(0.0, 1e-15));
}

TEST_CASE("transforms reject invalid input", "[scattering]") {
    CHECK_THROWS_AS(port_to_wave(port(1.0, 1.0), ScatteringConfig{0.0, 1.0}), ContractViolation);
    CHECK_THROWS_AS(port_to_wave(port(1.0, 1.0), ScatteringConfig{1.0, -1.0}), ContractViolation);
    CHECK_THROWS_AS(port_to_wave(port(NAN, 1.0), ScatteringConfig{1.0, 1.0}), ContractViolation);
    CHECK_THROWS_AS(port_to_wave(PortSample{Vec::Zero(1), Vec::Zero(2)}, ScatteringConfig{1.0, 1.0}),
                    ContractViolation);
    CHECK_THROWS_AS(wave_power(Vec::Zero(1), Vec::Zero(2)), ContractViolation);
}

TEST_CASE("coupling structure validates orthogonality", "[scattering]") {
    CHECK_THROWS_AS(CouplingStructure(Mat::Constant(2, 2, 1.0)), ContractViolation);
    CHECK_THROWS_AS(CouplingStructure(Mat::Zero(2, 3)), ContractViolation);
    const CouplingStructure C = CouplingStructure::swap(2);
    CHECK(C.orthogonality_defect() == 0.0);
    // closed-form resolvent equals the inverse of 2I - P
    const Mat inv = (2.0 * Mat::Identity(4, 4) - C.P()).inverse();
    CHECK((C.coupling_resolvent() - inv).norm() <= 1e-15);

    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec x = oracle::random_vec(rng, 4);
        worst = std::max(worst, std::abs(C.apply(x).norm() - x.norm()) / x.norm());
    }
    CHECK(worst <= 1e-14);
}

TEST_CASE("coupling projection on the worked example", "[scattering]") {
    const CouplingStructure C = CouplingStructure::swap(1);
    const LiftedWaveState in(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4));
    const LiftedWaveState out = coupling_projection(in, C);
    for (int i = 0; i < 4; ++i) CHECK_THAT(out.zeta[i], WithinAbs(2.5, 1e-15));
    CHECK((out.zeta - oracle::least_squares_projection(C.P(), in.zeta)).norm() <= 1e-14);
}

TEST_CASE("coupling projection fixes consistent pairs and is idempotent", "[scattering][property]") {
    std::mt19937_64 rng(9);
    const CouplingStructure C = CouplingStructure::swap(2);
    for (int i = 0; i < 100; ++i) {
        const Vec b = oracle::random_vec(rng, 4);
        const LiftedWaveState consistent(C.apply(b), b);
        CHECK((coupling_projection(consistent, C).zeta - consistent.zeta).norm() <= 1e-15);
        const LiftedWaveState z(oracle::random_vec(rng, 8));
        const LiftedWaveState once = coupling_projection(z, C);
        CHECK((coupling_projection(once, C).zeta - once.zeta).norm() <= 1e-15);
    }
}

TEST_CASE("coupling projection is the nearest consistent pair", "[scattering][property]") {
    std::mt19937_64 rng(11);
    // random orthogonal P
    const Mat A = oracle::random_vec(rng, 9).reshaped(3, 3);
    const Mat P = Eigen::HouseholderQR<Mat>(A).householderQ();
    const CouplingStructure C(P);
    double worst_gap = -1.0;
    double worst_ls = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const LiftedWaveState z(oracle::random_vec(rng, 6));
        const LiftedWaveState pz = coupling_projection(z, C);
        worst_ls = std::max(worst_ls, (pz.zeta - oracle::least_squares_projection(P, z.zeta)).norm());
        const double dist = (z.zeta - pz.zeta).norm();
        for (int j = 0; j < 1000; ++j) {
            const Vec b = oracle::random_vec(rng, 3);
            Vec c(6);
            c << P * b, b;
            worst_gap = std::max(worst_gap, dist - (z.zeta - c).norm());
        }
    }
    CHECK(worst_ls <= 1e-12);
    CHECK(worst_gap <= 1e-12);
}

TEST_CASE("coupled waves conserve port power", "[scattering][property]") {
    std::mt19937_64 rng(13);
    const ScatteringConfig cfg{0.4, 0.01};
    const CouplingStructure C = CouplingStructure::swap(1);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec b = oracle::random_vec(rng, 2, 3.0);
        const Vec a = C.apply(b);
        const PortSample pa = wave_to_port(WavePair{a.head(1), b.head(1)}, cfg);
        const PortSample pb = wave_to_port(WavePair{a.tail(1), b.tail(1)}, cfg);
        worst = std::max(worst, std::abs(pa.power() + pb.power()));
        // e_A = e_B and f_A + f_B = 0
        CHECK_THAT(pa.effort[0] - pb.effort[0], WithinAbs(0.0, 1e-12));
        CHECK_THAT(pa.flow[0] + pb.flow[0], WithinAbs(0.0, 1e-12));
    }
    CHECK(worst <= 1e-12);
}
