#include "catch_amalgamated.hpp"
#include "oracles.hpp"

using namespace phwave;
using namespace phwave::bench;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BenchmarkConfig table1() { return BenchmarkConfig{}; }

std::vector<Vec> reachable_samples(int dim, std::mt19937_64& rng, int count) {
    std::vector<Vec> out;
    for (int i = 0; i < count; ++i) out.push_back(oracle::random_vec(rng, dim, 5.0));
    return out;
}

/// 1-D model holding only the quartic spring term.
SubsystemModel quartic_only(double knl) {
    SubsystemModel m;
    m.label = "quartic";
    m.state_dim = 1;
    m.port_dim = 1;
    m.hamiltonian = [=](const Vec& x) { return 0.25 * knl * std::pow(x[0], 4); };
    m.grad_hamiltonian = [=](const Vec& x) -> Vec { return Vec::Constant(1, knl * std::pow(x[0], 3)); };
    m.structure_J = [](const Vec&) -> Mat { return Mat::Zero(1, 1); };
    m.dissipation_R = [](const Vec&) -> Mat { return Mat::Zero(1, 1); };
    m.port_G = [](const Vec&) -> Mat { return Mat::Ones(1, 1); };
    return m;
}

}  // namespace

TEST_CASE("benchmark models satisfy the structural invariants", "[ph-core]") {
    std::mt19937_64 rng(7);
    const auto cfg = table1();
    for (const auto& model : {make_duffing_subsystem(cfg), make_linear_subsystem_b(cfg)}) {
        const auto samples = reachable_samples(model.state_dim, rng, 200);
        const StructureCheck chk = check_structure(model, samples);
        CHECK(chk.max_skew_defect <= 1e-12);
        CHECK(chk.max_symmetry_defect <= 1e-12);
        CHECK(chk.min_dissipation_eig >= -1e-12);
        CHECK(chk.min_hamiltonian >= 0.0);
        CHECK(chk.ok);
    }
}

TEST_CASE("extended dissipation rejects a non-PSD cross term", "[ph-core]") {
    auto cfg = table1();
    cfg.c12 = 0.05;
    SubsystemModel b = make_linear_subsystem_b(cfg);
    b.cross_dissipation = [](const Vec&) -> Mat { return (Mat(3, 1) << 0.0, 10.0, 0.0).finished(); };
    const std::vector<Vec> samples{Vec::Zero(3)};
    CHECK_FALSE(check_structure(b, samples).ok);
}

TEST_CASE("discrete gradient reduces to the midpoint gradient for quadratic H", "[ph-core]") {
    std::mt19937_64 rng(11);
    const Mat A = oracle::random_vec(rng, 9).reshaped(3, 3);
    const Mat K = A * A.transpose() + Mat::Identity(3, 3);
    const SubsystemModel model = make_linear_subsystem("quad", K, Mat::Zero(3, 3), Mat::Zero(3, 3), Mat::Ones(3, 1));
    for (int i = 0; i < 100; ++i) {
        const Vec x = oracle::random_vec(rng, 3);
        const Vec y = oracle::random_vec(rng, 3);
        const Vec expected = K * (x + y) / 2.0;
        CHECK((discrete_gradient(model, x, y) - expected).norm() <= 1e-12 * (1.0 + expected.norm()));
    }
}

TEST_CASE("discrete gradient at coincident points is the gradient", "[ph-core]") {
    const SubsystemModel a = make_duffing_subsystem(table1());
    const Vec x = Eigen::Vector2d(0.3, -2.0);
    CHECK((discrete_gradient(a, x, x) - a.grad_hamiltonian(x)).norm() == 0.0);
    const Vec y = x + Vec::Constant(2, 1e-12);
    CHECK((discrete_gradient(a, x, y) - a.grad_hamiltonian(0.5 * (x + y))).norm() == 0.0);
}

TEST_CASE("discrete gradient of the quartic term equals its 1-D secant", "[ph-core]") {
    // secant of 1/4 * 8000 * q^4 between q = 0 and q = 0.1: (0.25*8000*1e-4 - 0)/0.1
    const double secant = (0.25 * 8000.0 * 1e-4) / 0.1;
    const SubsystemModel m = quartic_only(8000.0);
    const Vec g = discrete_gradient(m, Vec::Zero(1), Vec::Constant(1, 0.1));
    CHECK_THAT(g[0], WithinRel(secant, 1e-14));
    CHECK_THAT(g[0], WithinRel(2.0, 1e-14));
}

TEST_CASE("discrete chain rule holds on random pairs for both benchmark Hamiltonians", "[ph-core][property]") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> scale(-6.0, 1.0);
    const auto cfg = table1();
    for (const auto& model : {make_duffing_subsystem(cfg), make_linear_subsystem_b(cfg)}) {
        double worst = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const Vec x = oracle::random_vec(rng, model.state_dim);
            const Vec y = x + std::pow(10.0, scale(rng)) * oracle::random_vec(rng, model.state_dim);
            const double dH = model.hamiltonian(y) - model.hamiltonian(x);
            const double lhs = discrete_gradient(model, x, y).dot(y - x);
            const double mag = std::abs(model.hamiltonian(y)) + std::abs(model.hamiltonian(x));
            worst = std::max(worst, std::abs(lhs - dH) / (1.0 + mag));
        }
        INFO(model.label);
        CHECK(worst <= 1e-13);
    }
}

TEST_CASE("Duffing discrete gradient stays accurate for short steps", "[ph-core][oracle]") {
    const auto cfg = table1();
    const SubsystemModel a = make_duffing_subsystem(cfg);
    using ld = __float128;
    const ld m1 = cfg.m1, k1 = cfg.k1, knl = cfg.k_nl;
    auto H = [&](ld q, ld p) { return p * p / (2 * m1) + k1 * q * q / 2 + knl * q * q * q * q / 4; };
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> scale(-7.0, -1.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Vec x = oracle::random_vec(rng, 2, 2.0) + Eigen::Vector2d(0.0, 30.0);
        const Vec y = x + std::pow(10.0, scale(rng)) * oracle::random_vec(rng, 2);
        // quad-precision Gonzalez formula
        const ld q = x[0], p = x[1], dq = ld(y[0]) - q, dp = ld(y[1]) - p;
        const ld mq = q + dq / 2, mp = p + dp / 2;
        const ld gq = k1 * mq + knl * mq * mq * mq, gp = mp / m1;
        const ld defect = H(q + dq, p + dp) - H(q, p) - gq * dq - gp * dp;
        const ld c = defect / (dq * dq + dp * dp);
        const Vec dg = discrete_gradient(a, x, y);
        const double err = std::hypot(double(dg[0] - (gq + c * dq)), double(dg[1] - (gp + c * dp)));
        worst = std::max(worst, err / (1.0 + std::abs(double(gq)) + std::abs(double(gp))));
    }
    CHECK(worst <= 1e-14);
}

TEST_CASE("discrete gradient Jacobian matches finite differences", "[ph-core]") {
    const SubsystemModel a = make_duffing_subsystem(table1());
    std::mt19937_64 rng(17);
    for (int i = 0; i < 50; ++i) {
        const Vec x = oracle::random_vec(rng, 2, 0.5);
        const Vec y = x + oracle::random_vec(rng, 2, 0.1);
        const Mat Jac = discrete_gradient_jacobian(a, x, y);
        Mat fd(2, 2);
        for (int j = 0; j < 2; ++j) {
            const double h = 1e-6;
            Vec yp = y, ym = y;
            yp[j] += h;
            ym[j] -= h;
            fd.col(j) = (discrete_gradient(a, x, yp) - discrete_gradient(a, x, ym)) / (2 * h);
        }
        CHECK((Jac - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
    }
}

TEST_CASE("discrete gradient rejects mismatched or non-finite states", "[ph-core]") {
    const SubsystemModel a = make_duffing_subsystem(table1());
    CHECK_THROWS_AS(discrete_gradient(a, Vec::Zero(2), Vec::Zero(3)), ContractViolation);
    CHECK_THROWS_AS(discrete_gradient(a, Vec::Zero(2), Vec::Constant(2, NAN)), ContractViolation);
}

TEST_CASE("step from equilibrium with zero input stays at equilibrium", "[ph-core]") {
    const auto cfg = table1();
    const ScatteringConfig scat{cfg.gamma, cfg.dt};
    for (const auto& model : {make_duffing_subsystem(cfg), make_linear_subsystem_b(cfg)}) {
        const StepResult r = step_with_wave(model, Vec::Zero(model.state_dim), Vec::Zero(1), scat);
        CHECK(r.next_state.norm() == 0.0);
        CHECK(r.outgoing.norm() == 0.0);
        CHECK(frozen_port_map(model, Vec::Zero(model.state_dim), Vec::Zero(1), scat).norm() == 0.0);
    }
}

TEST_CASE("linear subsystem step matches a direct linear solve", "[ph-core][oracle]") {
    auto cfg = table1();
    const ScatteringConfig scat{cfg.gamma, cfg.dt};
    const double k = scat.wave_scale();
    std::mt19937_64 rng(19);

    Mat Q = Mat::Zero(3, 3);
    Q.diagonal() << cfg.k2, 1.0 / cfg.m2, cfg.k12;
    Mat J(3, 3);
    J << 0, 1, 0, -1, 0, 1, 0, -1, 0;
    Mat R = Mat::Zero(3, 3);
    R(1, 1) = cfg.c12 + cfg.c2;
    const Mat G = (Mat(3, 1) << 0, 0, -1).finished();
    const Mat Rxu = (Mat(3, 1) << 0, cfg.c12, 0).finished();
    const Mat D = Mat::Constant(1, 1, cfg.c12);
    const SubsystemModel b = make_linear_subsystem_b(cfg);

    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec x = oracle::random_vec(rng, 3);
        const Vec a = oracle::random_vec(rng, 1);
        const StepResult r = step_with_wave(b, x, a, scat);
        const auto o = oracle::linear_step(Q, J, R, G, Rxu, D, false, x, cfg.dt, k, k * cfg.gamma, a);
        worst = std::max(worst, (r.next_state - o.next_state).norm() / (1.0 + o.next_state.norm()));
        worst = std::max(worst, (r.port.effort - o.effort).norm() / (1.0 + o.effort.norm()));
        worst = std::max(worst, (r.port.flow - o.flow).norm() / (1.0 + o.flow.norm()));
    }
    CHECK(worst <= 1e-11);
}

TEST_CASE("random effort-in linear model matches the direct linear solve", "[ph-core][oracle]") {
    std::mt19937_64 rng(23);
    const ScatteringConfig scat{0.7, 0.05};
    const double k = scat.wave_scale();
    for (int trial = 0; trial < 20; ++trial) {
        const Mat A = oracle::random_vec(rng, 16).reshaped(4, 4);
        const Mat Q = A * A.transpose() + Mat::Identity(4, 4);
        const Mat S = oracle::random_vec(rng, 16).reshaped(4, 4);
        const Mat J = S - S.transpose();
        const Mat B = oracle::random_vec(rng, 16).reshaped(4, 4);
        const Mat R = 0.1 * B * B.transpose();
        const Mat G = oracle::random_vec(rng, 8).reshaped(4, 2);
        const SubsystemModel model = make_linear_subsystem("rand", Q, J, R, G);
        const Vec x = oracle::random_vec(rng, 4);
        const Vec a = oracle::random_vec(rng, 2);
        const StepResult r = step_with_wave(model, x, a, scat);
        const auto o = oracle::linear_step(Q, J, R, G, Mat::Zero(4, 2), Mat::Zero(2, 2), true, x, scat.dt, k,
                                           k * scat.gamma, a);
        CHECK((r.next_state - o.next_state).norm() <= 1e-11 * (1.0 + o.next_state.norm()));
        CHECK((r.port.flow - o.flow).norm() <= 1e-11 * (1.0 + o.flow.norm()));
    }
}

TEST_CASE("lossless steps balance energy against the wave supply", "[ph-core][property]") {
    auto cfg = table1();
    cfg.c1 = 0.0;
    const SubsystemModel a = make_duffing_subsystem(cfg);
    const ScatteringConfig scat{cfg.gamma, cfg.dt};
    std::mt19937_64 rng(29);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec x = oracle::random_vec(rng, 2, 0.3);
        const Vec ain = oracle::random_vec(rng, 1, 2.0);
        const StepResult r = step_with_wave(a, x, ain, scat);
        const double dH = a.hamiltonian(r.next_state) - a.hamiltonian(x);
        const double supply = 0.5 * (ain.squaredNorm() - r.outgoing.squaredNorm());
        worst = std::max(worst, std::abs(dH - supply) / (1.0 + std::abs(a.hamiltonian(x))));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("dissipative steps never create energy", "[ph-core][property]") {
    auto cfg = table1();
    cfg.c1 = 0.3;
    const auto scat = ScatteringConfig{cfg.gamma, cfg.dt};
    std::mt19937_64 rng(31);
    for (const auto& model : {make_duffing_subsystem(cfg), make_linear_subsystem_b(cfg)}) {
        double worst = -1.0;
        for (int i = 0; i < 500; ++i) {
            const Vec x = oracle::random_vec(rng, model.state_dim, 0.3);
            const Vec ain = oracle::random_vec(rng, 1, 2.0);
            const StepResult r = step_with_wave(model, x, ain, scat);
            worst = std::max(worst, step_passivity_residual(model, x, ain, r) / (1.0 + std::abs(model.hamiltonian(x))));
        }
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("frozen port map is pure", "[ph-core]") {
    const auto cfg = table1();
    const SubsystemModel a = make_duffing_subsystem(cfg);
    const ScatteringConfig scat{cfg.gamma, cfg.dt};
    const Vec x = Eigen::Vector2d(0.4, 0.0);
    const Vec x_copy = x;
    const Vec ain = Vec::Constant(1, 0.7);
    const Vec b1 = frozen_port_map(a, x, ain, scat);
    const Vec b2 = frozen_port_map(a, x, ain, scat);
    CHECK(b1 == b2);
    CHECK(x == x_copy);
}

TEST_CASE("linear frozen map derivative equals (Z - gamma)/(Z + gamma)", "[ph-core][oracle]") {
    const auto cfg = table1();
    const ScatteringConfig scat{cfg.gamma, cfg.dt};
    Mat Q = Mat::Zero(3, 3);
    Q.diagonal() << cfg.k2, 1.0 / cfg.m2, cfg.k12;
    Mat J(3, 3);
    J << 0, 1, 0, -1, 0, 1, 0, -1, 0;
    Mat R = Mat::Zero(3, 3);
    R(1, 1) = cfg.c12;
    const Mat G = (Mat(3, 1) << 0, 0, -1).finished();
    const Mat Rxu = (Mat(3, 1) << 0, cfg.c12, 0).finished();
    const Mat D = Mat::Constant(1, 1, cfg.c12);
    const double Z = oracle::linear_flow_in_impedance(Q, J, R, G, Rxu, D, cfg.dt)(0, 0);
    REQUIRE(Z >= cfg.gamma);

    const SubsystemModel b = make_linear_subsystem_b(cfg);
    const Vec x = Eigen::Vector3d(0.1, -0.2, 0.05);
    const double h = 1e-4;
    const double fd = (frozen_port_map(b, x, Vec::Constant(1, h), scat)[0] -
                       frozen_port_map(b, x, Vec::Constant(1, -h), scat)[0]) / (2 * h);
    const double expected = (Z - cfg.gamma) / (Z + cfg.gamma);
    CHECK_THAT(fd, WithinAbs(expected, 1e-9));
    CHECK(fd >= 0.0);
    CHECK(fd <= 1.0);
}

TEST_CASE("two-port linear frozen map has a symmetric Jacobian with spectrum in [0,1]", "[ph-core][oracle]") {
    // effort-in, H = 1/2 x^T Q x, J = 0, R = r I, G = I: diagonal impedance above gamma.
    const Mat Q = Eigen::Vector2d(2.0, 3.0).asDiagonal();
    const SubsystemModel m = make_linear_subsystem("two-port", Q, Mat::Zero(2, 2), 0.5 * Mat::Identity(2, 2),
                                                   Mat::Identity(2, 2));
    const ScatteringConfig scat{0.3, 0.1};
    const Vec x = Eigen::Vector2d(0.2, -0.1);
    Mat Jfd(2, 2);
    for (int j = 0; j < 2; ++j) {
        Vec ap = Vec::Zero(2), am = Vec::Zero(2);
        ap[j] = 1e-4;
        am[j] = -1e-4;
        Jfd.col(j) = (frozen_port_map(m, x, ap, scat) - frozen_port_map(m, x, am, scat)) / 2e-4;
    }
    // independent: f = Q x_mid, x+ = x + dt(-R Q x_mid + e) => df/de = (Q^-1/dt*2 ... ) assembled here
    const Mat dxde = (Mat::Identity(2, 2) + 0.5 * scat.dt * 0.5 * Q).inverse() * scat.dt;
    const Mat Y = 0.5 * Q * dxde;  // df = Y de
    const Mat Z = Y.inverse();
    const Mat I = Mat::Identity(2, 2);
    const Mat expected = (Z - scat.gamma * I) * (Z + scat.gamma * I).inverse();
    CHECK((Jfd - expected).norm() <= 1e-8);
    CHECK((Jfd - Jfd.transpose()).norm() <= 1e-8);
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (Jfd + Jfd.transpose()));
    CHECK(eig.eigenvalues().minCoeff() >= 0.0);
    CHECK(eig.eigenvalues().maxCoeff() <= 1.0);
}

TEST_CASE("step error over a fixed horizon is second order", "[ph-core][oracle]") {
    // Port terminated by a fixed resistive source, e + gamma f = c, so the continuous problem
    // does not depend on the step size.
    const auto cfg = table1();
    const SubsystemModel a = make_duffing_subsystem(cfg);
    const double gamma = cfg.gamma, c = 3.0, horizon = 0.08;
    auto run = [&](double dt) {
        const ScatteringConfig scat{gamma, dt};
        Vec x = Eigen::Vector2d(0.4, 0.0);
        const long n = std::lround(horizon / dt);
        const Vec ain = Vec::Constant(1, scat.wave_scale() * c);
        for (long i = 0; i < n; ++i) x = step_with_wave(a, x, ain, scat).next_state;
        return x;
    };
    const double dt = 0.01;
    const Vec ref = run(dt / 64);
    const double e1 = (run(dt) - ref).norm();
    const double e2 = (run(dt / 2) - ref).norm();
    const double e3 = (run(dt / 4) - ref).norm();
    INFO("errors " << e1 << " " << e2 << " " << e3);
    CHECK(e1 / e2 >= 3.5);
    CHECK(e1 / e2 <= 4.5);
    CHECK(e2 / e3 >= 3.5);
    CHECK(e2 / e3 <= 4.5);
}

TEST_CASE("step rejects bad inputs and reports non-convergence", "[ph-core]") {
    const auto cfg = table1();
    const SubsystemModel a = make_duffing_subsystem(cfg);
    const ScatteringConfig scat{cfg.gamma, cfg.dt};
    CHECK_THROWS_AS(step_with_wave(a, Vec::Zero(3), Vec::Zero(1), scat), ContractViolation);
    CHECK_THROWS_AS(step_with_wave(a, Vec::Zero(2), Vec::Constant(1, INFINITY), scat), ContractViolation);
    CHECK_THROWS_AS(step_with_wave(a, Vec::Zero(2), Vec::Zero(1), ScatteringConfig{-1.0, 0.01}),
                    ContractViolation);
    NewtonOptions starved;
    starved.max_iterations = 1;
    try {
        step_with_wave(a, Eigen::Vector2d(0.4, 3.0), Vec::Constant(1, 5.0), scat, starved);
        FAIL("expected SolverFailure");
    } catch (const SolverFailure& e) {
        CHECK(e.last_residual() > 0.0);
    }
}
