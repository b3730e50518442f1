#include <gtest/gtest.h>

#include <plasmid_spectra/eigen_operator.hpp>

#include <random>

using namespace plasmid;

namespace {

ModelParameters constant_rates(Phi phi = Phi::uniform(), double m = 0.005, double mu = 0.1) {
    return ModelParameters(RateFunction::logistic(1.0, 1.0), RateFunction::constant(0.4), RateFunction::constant(mu),
                           SegregationKernel(std::move(phi), m, 1.0, true));
}

ModelParameters varying_rates() {
    return ModelParameters(RateFunction::logistic(1.0, 1.0), RateFunction::polynomial({0.3, 0.2}),
                           RateFunction::polynomial({0.05, 0.1}), SegregationKernel(Phi::symmetric_beta(2), 0.01, 1.0));
}

double mass_above(const EigenPair& e, double m) {
    double above = 0.0, all = 0.0;
    for (std::size_t c = 0; c < e.U.size(); ++c) {
        const double w = e.edges[c + 1] - e.edges[c];
        all += e.U[c] * w;
        if (e.edges[c] >= m - 1e-14) above += e.U[c] * w;
    }
    return above / all;
}

}  // namespace

TEST(EigenOperator, EntriesNonnegativeAndPositiveWithRegularization) {
    const auto p = varying_rates();
    const auto grid = graded_grid(1.0, 64, p.m());
    const auto G = assemble_G(p, 0.1, 1e-3, grid);
    const Eigen::MatrixXd D = G.dense();
    EXPECT_GE(D.minCoeff(), 0.0);
    const auto one = G.apply(std::vector<double>(G.nodes(), 1.0));
    for (double v : one) EXPECT_GT(v, 0.0);

    const auto G0 = assemble_G(p, 0.1, 0.0, grid);
    EXPECT_GE(G0.dense().minCoeff(), 0.0);
}

TEST(EigenOperator, IntegralBound) {
    const auto p = varying_rates();
    const auto grid = graded_grid(1.0, 128, p.m());
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (double lambda : {-0.04, 0.2, 0.7}) {
        const double eps = 1e-2;
        const auto G = assemble_G(p, lambda, eps, grid);
        const double bound = (2.0 * p.beta_m_hi() + 2.0 * eps) / (lambda + p.beta_m_lo() + p.mu_lo());
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> f(G.nodes());
            for (double& v : f) v = U(rng);
            EXPECT_LE(G.integral(G.apply(f)), bound * G.integral(f) + 1e-6);
        }
    }
}

TEST(EigenOperator, PowerIterationIsHomogeneous) {
    const auto p = varying_rates();
    const auto G = assemble_G(p, 0.2, 1e-3, graded_grid(1.0, 128, p.m()));
    const auto a = spectral_radius(G);
    const double c = 3.5;
    const auto b = power_iteration(
        [&](const std::vector<double>& x) {
            auto y = G.apply(x);
            for (double& v : y) v *= c;
            return y;
        },
        G.nodes());
    EXPECT_NEAR(b.r, c * a.r, 1e-8 * c * a.r);
    for (std::size_t i = 0; i < a.psi.size(); ++i) EXPECT_NEAR(a.psi[i], b.psi[i], 1e-8);
    EXPECT_LT(a.residual, 1e-9 * std::max(1.0, a.r));
    EXPECT_NEAR(*std::max_element(a.psi.begin(), a.psi.end()), 1.0, 1e-15);
    EXPECT_GE(*std::min_element(a.psi.begin(), a.psi.end()), 0.0);
}

TEST(EigenOperator, BracketEndpointsStraddleOne) {
    const auto p = constant_rates();
    const auto grid = graded_grid(1.0, 512, p.m());
    FlowMap flow(p.b(), p.z0());
    const auto tables = build_operator_tables(p, grid, flow);
    const auto res = find_lambda(p, 1e-3, tables);
    EXPECT_GE(res.r_lower_end, 2.0 - 1e-6);
    EXPECT_LE(res.r_upper_end, 1.0);
    EXPECT_TRUE(res.monotone);
    EXPECT_LT(std::abs(res.r - 1.0), 1e-8);
}

TEST(EigenOperator, FindLambdaConstantRates) {
    const auto p = constant_rates();
    const auto grid = graded_grid(1.0, 512, p.m());
    FlowMap flow(p.b(), p.z0());
    const auto tables = build_operator_tables(p, grid, flow);
    const auto base = find_lambda(p, 1e-4, tables);
    EXPECT_NEAR(base.lambda, 0.3, 0.02);

    const auto q = p.with_mu(RateFunction::constant(0.15));
    const auto qtables = build_operator_tables(q, grid, flow);
    const auto shifted = find_lambda(q, 1e-4, qtables);
    EXPECT_NEAR(shifted.lambda - base.lambda, -0.05, 2e-3);
}

TEST(EigenOperator, BracketFailureOnBadEndpoint) {
    const auto p = constant_rates();
    const auto grid = graded_grid(1.0, 32, p.m());
    FlowMap flow(p.b(), p.z0());
    auto tables = std::make_shared<OperatorTables>(*build_operator_tables(p, grid, flow));
    tables->K0 *= 0.25;  // kernel no longer integrates to 2
    try {
        find_lambda(p, 1e-3, tables);
        FAIL() << "expected BracketFailure";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::BracketFailure);
    }
}

// With constant rates, integrating the eigen-equation over (0, z0) gives
// lambda = beta * (share of U above m) - mu, so lambda < beta - mu whenever
// m > 0 and the gap closes as m -> 0.
TEST(EigenOperator, ContinuationMatchesMassIdentity) {
    OperatorOptions opt;
    opt.cells = 512;
    double prev = -1.0;
    for (double m : {0.02, 0.005, 0.001}) {
        const auto e = solve_operator(constant_rates(Phi::uniform(), m), opt);
        EXPECT_NEAR(e.lambda, 0.4 * mass_above(e, m) - 0.1, 2e-3) << "m=" << m;
        EXPECT_GT(e.lambda, prev);
        EXPECT_LT(e.lambda, 0.3);
        EXPECT_LT(e.closure_residual, 1e-4);
        EXPECT_TRUE(e.in_eigenvalue_bounds);
        prev = e.lambda;
    }
    EXPECT_NEAR(prev, 0.3, 0.015);
}

TEST(EigenOperator, UniformProfileApproachesClosedFormAsCutoffShrinks) {
    const double a = 0.8;
    auto exact = [a](double z) { return std::pow(z, -a) * std::pow(1.0 - z, a - 1.0); };
    const double nrm = integrate_adaptive(exact, 0.005, 1.0, 1e-12, 30);
    const auto ref = Profile::function([&](double z) { return exact(z) / nrm; });
    OperatorOptions opt;
    opt.cells = 512;
    double prev = 1.0;
    for (double m : {0.02, 0.005, 0.0002}) {
        const auto e = solve_operator(constant_rates(Phi::uniform(), m), opt);
        const double d = relative_l1(e.profile(), ref, 0.01, 0.99);
        EXPECT_LT(d, prev) << "m=" << m;
        prev = d;
    }
    EXPECT_LT(prev, 0.06);
}

TEST(EigenOperator, ProfileIsNormalizedAndNonnegative) {
    OperatorOptions opt;
    opt.cells = 256;
    const auto e = solve_operator(constant_rates(Phi::bimodal(0.8, 0.15)), opt);
    double s = 0.0;
    for (std::size_t c = 0; c < e.U.size(); ++c) {
        EXPECT_GE(e.U[c], 0.0);
        const double lo = std::max(e.edges[c], 0.005), hi = e.edges[c + 1];
        if (hi > lo) s += e.U[c] * (hi - lo);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (double v : e.Psi) EXPECT_GE(v, 0.0);
    ASSERT_EQ(e.epsilon_history.size(), 3u);
}

TEST(EigenOperator, DominanceForSymmetricBeta) {
    const auto p = constant_rates(Phi::symmetric_beta(2));
    const auto grid = graded_grid(1.0, 256, p.m());
    const auto d = spectrum_dominance_check(p, grid);
    EXPECT_NEAR(d.lambda_d, 0.3, 0.03);
    EXPECT_EQ(d.imag_part, 0.0);
    EXPECT_GT(d.gap, 1e-3 * (p.beta_m_hi() + p.mu_hi()));
    EXPECT_GT(d.min_component_ratio, -1e-8);
    for (std::size_t i = 1; i < d.spectrum.size(); ++i) EXPECT_LT(d.spectrum[i].first, d.lambda_d - d.threshold);

    const auto q = p.with_mu(RateFunction::constant(0.35));
    const auto dq = spectrum_dominance_check(q, grid);
    EXPECT_NEAR(dq.lambda_d, d.lambda_d - 0.25, 1e-10);
}

TEST(EigenOperator, TxiRadiusCrossesOneAtDominantEigenvalue) {
    const auto p = constant_rates(Phi::symmetric_beta(2));
    const auto grid = graded_grid(1.0, 256, p.m());
    const auto d = spectrum_dominance_check(p, grid);
    const auto at = t_xi_radius(p, d.lambda_d, grid);
    EXPECT_NEAR(at.r, 1.0, 2e-2);
    EXPECT_GE(at.min_entry, 0.0);

    double prev = std::numeric_limits<double>::infinity();
    for (double xi : {d.lambda_d - 0.1, d.lambda_d, d.lambda_d + 0.2}) {
        const auto t = t_xi_radius(p, xi, grid);
        EXPECT_LT(t.r, prev);
        EXPECT_LE(t.norm, t.norm_bound * (1.0 + 1e-3));
        prev = t.r;
    }
    EXPECT_LT(prev, 1.0);
    const double beyond = 2.0 * p.beta_m_hi() - p.beta_m_lo() - p.mu_lo() + 0.01;
    EXPECT_LT(t_xi_radius(p, beyond, grid).r, 1.0);
}
