#include <gtest/gtest.h>

#include <plasmid_spectra/pde.hpp>

#include <cmath>

using namespace plasmid;

namespace {
ModelParameters model(RateFunction b, double beta, double mu, Phi phi = Phi::symmetric_beta(2.0), double m = 0.005) {
    return ModelParameters(std::move(b), RateFunction::constant(beta), RateFunction::constant(mu),
                           SegregationKernel(std::move(phi), m, 1.0, true));
}
double bump(double z) { return 30 * z * z * (1 - z) * (1 - z); }
}  // namespace

TEST(Pde, StaticWithoutRates) {
    PdeSolver s(model(RateFunction::constant(0.0), 0.0, 0.0), graded_grid(1.0, 128, 0.005));
    auto st = s.project(bump);
    auto st2 = s.step(st, 0.1);
    EXPECT_EQ(st.u, st2.u);
}

TEST(Pde, TransportConservesMass) {
    PdeSolver s(model(RateFunction::logistic(1.0, 1.0), 0.0, 0.0), graded_grid(1.0, 256, 0.005));
    auto st = s.project(bump);
    const double m0 = s.mass(st);
    auto tr = run_pde(s, st, 5.0);
    EXPECT_NEAR(s.mass(tr.final_state), m0, 1e-12 * m0);
}

TEST(Pde, CflIsEnforced) {
    PdeSolver s(model(RateFunction::logistic(1.0, 1.0), 0.4, 0.1), graded_grid(1.0, 256, 0.005));
    auto st = s.project(bump);
    try {
        s.step(st, 2.0 * s.max_dt());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::CflViolation);
    }
}

TEST(Pde, MassBalance) {
    PdeSolver s(model(RateFunction::logistic(1.0, 1.0), 0.4, 0.1, Phi::bimodal(0.8, 0.15)),
                graded_grid(1.0, 256, 0.005));
    auto st = s.project(bump);
    for (int k = 0; k < 100; ++k) {
        StepBudget b;
        auto next = s.step(st, s.max_dt(), &b);
        const double m0 = s.mass_of(st.u), m1 = s.mass_of(next.u);
        EXPECT_NEAR(m1 - m0, b.reaction + b.fragmentation, 1e-13 * m0);
        const double dt = 1e-8;
        auto probe = s.step(st, dt);
        EXPECT_NEAR((s.mass_of(probe.u) - m0) / dt, s.mass_rate(st.u), 1e-6 * m0);
        st = next;
        for (double x : st.u) ASSERT_GE(x, 0.0);
    }
}

TEST(Pde, V0ScalarCases) {
    EXPECT_NEAR(step_v0(2.0, 0.0, 0.0, -0.1, 1.0), 2.0 * std::exp(-0.1), 1e-14);
    EXPECT_NEAR(step_v0(0.0, 3.0, 3.0, 0.0, 2.5), 7.5, 1e-14);
    // linearly varying source with decay, against a fine RK4 reference
    auto S = [](double t) { return std::exp(0.3 * t) + 0.5 * std::sin(2 * t); };
    const double r = 0.3;
    double v = 1.0;
    const int n = 500;
    for (int k = 0; k < n; ++k) v = step_v0(v, S(k * 0.002), S((k + 1) * 0.002), r, 0.002);
    double w = 1.0;
    const double h = 1e-4;
    for (int k = 0; k < 10000; ++k) {
        const double t = k * h;
        auto f = [&](double tt, double y) { return r * y + S(tt); };
        const double k1 = f(t, w), k2 = f(t + h / 2, w + h / 2 * k1), k3 = f(t + h / 2, w + h / 2 * k2),
                     k4 = f(t + h, w + h * k3);
        w += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    EXPECT_NEAR(v, w, 1e-6 * std::abs(w));
}

TEST(Pde, HigherDeathGivesSmallerDensity) {
    auto p1 = model(RateFunction::logistic(1.0, 1.0), 0.4, 0.1);
    auto p2 = p1.with_mu(RateFunction::polynomial({0.1, 0.2}));
    PdeSolver s1(p1, graded_grid(1.0, 128, 0.005)), s2(p2, graded_grid(1.0, 128, 0.005));
    auto a = s1.project(bump), b = s2.project(bump);
    const double dt = std::min(s1.max_dt(), s2.max_dt());
    for (int k = 0; k < 100; ++k) {
        a = s1.step(a, dt);
        b = s2.step(b, dt);
        for (std::size_t i = 0; i < a.u.size(); ++i) ASSERT_LE(b.u[i], a.u[i]);
    }
}

TEST(Pde, EmptyRunEchoesInitialData) {
    PdeSolver s(model(RateFunction::logistic(1.0, 1.0), 0.4, 0.1), graded_grid(1.0, 64, 0.005));
    auto st = s.project(bump);
    auto tr = run_pde(s, st, 0.0, {0.0, 1, true});
    ASSERT_EQ(tr.snapshots.size(), 1u);
    EXPECT_EQ(tr.snapshots[0], st.u);
}

TEST(Pde, LongtimeSlopeAndShift) {
    auto p = model(RateFunction::logistic(1.0, 1.0), 0.4, 0.1);
    PdeSolver s(p, graded_grid(1.0, 256, 0.005));
    auto est = longtime_eigen_estimate(run_pde(s, s.project(bump), 60.0));
    // the cutoff m lowers the growth rate a little below beta - mu
    EXPECT_NEAR(est.lambda, 0.3, 0.025);
    PdeSolver s2(p.with_mu(RateFunction::constant(0.25)), graded_grid(1.0, 256, 0.005));
    auto est2 = longtime_eigen_estimate(run_pde(s2, s2.project(bump), 60.0));
    EXPECT_NEAR(est2.lambda - est.lambda, -0.15, 2e-3);
}

TEST(Pde, ShortRunIsNotConverged) {
    PdeSolver s(model(RateFunction::logistic(1.0, 1.0), 0.4, 0.1), graded_grid(1.0, 128, 0.005));
    try {
        // all mass starts below the cutoff and crosses it during the window
        auto u0 = [](double z) { return z > 0.001 && z < 0.002 ? 1.0 : 0.0; };
        longtime_eigen_estimate(run_pde(s, s.project(u0), 2.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotConverged);
    }
}
