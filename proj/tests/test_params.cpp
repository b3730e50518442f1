#include <gtest/gtest.h>

#include <plasmid_spectra/params.hpp>

#include <cmath>

using namespace plasmid;

namespace {

ModelParameters fig1(Phi phi, bool oracle = false) {
    return ModelParameters(RateFunction::logistic(1.0, 1.0), RateFunction::constant(0.4), RateFunction::constant(0.1),
                           SegregationKernel(std::move(phi), 0.005, 1.0, oracle));
}

const AssumptionCheck* find(const ValidationReport& r, const std::string& name) {
    for (const auto& c : r.checks)
        if (c.name == name) return &c;
    return nullptr;
}

}  // namespace

TEST(Params, UniformKernelFailsEndpointCheckButHasMassTwo) {
    auto rep = validate(fig1(Phi::uniform(), true));
    ASSERT_NE(find(rep, "Phi(0) = Phi(1) = 0"), nullptr);
    EXPECT_FALSE(find(rep, "Phi(0) = Phi(1) = 0")->passed);
    EXPECT_FALSE(find(rep, "Phi(0) = Phi(1) = 0")->hard);
    EXPECT_TRUE(find(rep, "kernel mass = 2 on [m, z0]")->passed);
    EXPECT_FALSE(rep.hard_failure());
}

TEST(Params, UniformKernelWithoutOverrideIsHardFailure) {
    auto rep = validate(fig1(Phi::uniform(), false));
    EXPECT_TRUE(rep.hard_failure());
}

TEST(Params, SymmetricBetaPassesKernelChecks) {
    for (double m : {0.005, 0.1, 0.7}) {
        ModelParameters p(RateFunction::logistic(1.0, 1.0), RateFunction::constant(0.4), RateFunction::constant(0.1),
                          SegregationKernel(Phi::symmetric_beta(2.0), m, 1.0));
        auto rep = validate(p);
        for (const auto& c : rep.checks)
            if (c.assumption == "A4") {
                EXPECT_TRUE(c.passed) << c.name << " " << c.measured;
            }
        for (auto [zp, mass] : rep.kernel_mass) EXPECT_NEAR(mass, 2.0, 1e-8) << zp;
    }
}

TEST(Params, LogisticEndpointsAreExactlyZero) {
    auto rep = validate(fig1(Phi::symmetric_beta(2.0)));
    EXPECT_EQ(rep.b_at_0, 0.0);
    EXPECT_EQ(rep.b_at_z0, 0.0);
    EXPECT_FALSE(rep.hard_failure());
}

TEST(Params, BetaTruncation) {
    auto p = fig1(Phi::symmetric_beta(2.0));
    EXPECT_EQ(beta_m(p, 0.001), 0.0);
    EXPECT_EQ(beta_m(p, 0.5), 0.4);
    EXPECT_EQ(beta_m(p, 0.005), 0.4);
}

TEST(Params, KernelValues) {
    SegregationKernel k(Phi::uniform(), 0.005, 1.0, true);
    EXPECT_DOUBLE_EQ(kernel_eval(k, 0.25, 0.5), 4.0);
    EXPECT_EQ(kernel_eval(k, 0.001, 0.002), 0.0);
    EXPECT_THROW(kernel_eval(k, 0.6, 0.5), Error);
    EXPECT_THROW(kernel_eval(k, 0.1, 1.5), Error);
}

TEST(Params, KernelMassAndSymmetryAcrossFamilies) {
    for (const Phi& phi : {Phi::uniform(), Phi::symmetric_beta(2.0), Phi::symmetric_beta(4.0), Phi::symmetric_beta(2.5),
                           Phi::bimodal(0.8, 0.15)}) {
        SegregationKernel k(phi, 0.005, 1.0, true);
        for (int i = 0; i <= 20; ++i) {
            const double zp = 0.005 + 0.995 * i / 20.0;
            EXPECT_NEAR(kernel_mass(k, zp), 2.0, 1e-8) << phi.describe();
            for (int j = 0; j <= 50; ++j) {
                const double z = zp * j / 50.0;
                EXPECT_LT(std::abs(k(z, zp) - k(zp - z, zp)), 1e-12);
            }
        }
    }
}

TEST(Params, FragmentationWeightBoundedNearZero) {
    auto p = fig1(Phi::symmetric_beta(2.0));
    double sup = 0.0;
    for (int i = 1; i <= 2000; ++i) {
        const double zp = std::pow(10.0, -8.0 + 8.0 * i / 2000.0);
        for (int j = 0; j <= 10; ++j) sup = std::max(sup, p.beta_m(zp) * p.kernel()(zp * j / 10.0, zp));
    }
    EXPECT_TRUE(std::isfinite(sup));
    EXPECT_LE(sup, 0.4 * 2.0 / 0.005 * 1.5 + 1e-9);
}

TEST(Params, BoundsAreExtracted) {
    ModelParameters p(RateFunction::logistic(1.0, 1.0), RateFunction::polynomial({0.3, 0.2}),
                      RateFunction::polynomial({0.1, 0.0, 0.5}), SegregationKernel(Phi::symmetric_beta(2.0), 0.1, 1.0));
    EXPECT_NEAR(p.beta_m_lo(), 0.32, 1e-12);
    EXPECT_NEAR(p.beta_m_hi(), 0.5, 1e-12);
    EXPECT_NEAR(p.mu_lo(), 0.1, 1e-12);
    EXPECT_NEAR(p.mu_hi(), 0.6, 1e-12);
    EXPECT_NEAR(p.b_max(), 0.25, 1e-12);
}

TEST(Params, ErrorsOnBadInput) {
    EXPECT_THROW(ModelParameters(RateFunction::logistic(1.0, 1.0), RateFunction::constant(0.4),
                                 RateFunction::constant(0.1), SegregationKernel(Phi::uniform(), 1.0, 1.0, true)),
                 Error);
    try {
        ModelParameters(RateFunction::logistic(1.0, 1.0), RateFunction::constant(NAN), RateFunction::constant(0.1),
                        SegregationKernel(Phi::uniform(), 0.1, 1.0, true));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonFiniteEvaluation);
    }
}

TEST(Params, TabulatedRateInterpolatesMonotonically) {
    auto r = RateFunction::tabulated({0.0, 0.25, 0.5, 0.75, 1.0}, {0.0, 1.0, 1.0, 2.0, 2.0});
    EXPECT_DOUBLE_EQ(r(0.25), 1.0);
    for (int i = 0; i < 100; ++i) {
        const double z = 0.25 + 0.25 * i / 100.0;
        EXPECT_NEAR(r(z), 1.0, 1e-12);
    }
    double prev = -1;
    for (int i = 0; i <= 200; ++i) {
        const double v = r(i / 200.0);
        EXPECT_GE(v, prev - 1e-15);
        prev = v;
    }
}
