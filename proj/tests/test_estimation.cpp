#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <canopy/equilibrium.hpp>
#include <canopy/estimation.hpp>
#include <canopy/json_io.hpp>
#include <canopy/rng.hpp>

using namespace canopy;

namespace {

ModelParams table5() {
    ModelParams p;
    p.mu = 0.0482;
    p.sigma = 0.258;
    p.rho = 0.0487;
    p.gamma = 2.272;
    p.g2_form = G2Form::PowA;
    p.g2_k2 = 1.0;
    return p;
}

BeliefPrior table5_prior() { return BeliefPrior{0.553, 2.251}; }

std::string unit_name(int u) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "u%04d", u);
    return buf;
}

// untouched cover: exact log-normal steps, no clearing
Panel gbm_panel(int n_units, int years, std::uint64_t seed) {
    ModelParams p = table5();
    Rng draw(derive_seed(seed, "gbm-units"));
    Panel panel;
    for (int u = 0; u < n_units; ++u) {
        double x = 20.0 + 180.0 * draw.uniform();
        Rng path(derive_seed(seed, "gbm-path", static_cast<std::uint64_t>(u)));
        for (int t = 0; t < years; ++t) {
            panel.rows.push_back({unit_name(u), 2000 + t, x, 0.0});
            x *= std::exp((p.mu - 0.5 * p.sigma * p.sigma) + p.sigma * path.normal());
        }
    }
    return panel;
}

// cleared cover in the discretization whose first moment the GMM condition
// uses: X' = X (1 + (mu - q) + sigma Z)
Panel cleared_panel(int n_units, int years, std::uint64_t seed) {
    ModelParams p = table5();
    BeliefPrior pr = table5_prior();
    EquilibriumSolution sol = q_mfe_stationary(p, pr);
    Rng draw(derive_seed(seed, "panel-units"));
    Panel panel;
    for (int u = 0; u < n_units; ++u) {
        double a = draw.beta(pr.alpha, pr.beta);
        double x = 20.0 + 180.0 * draw.uniform();
        double rate = mfe_rate(a, p, sol.coupling_aggregate);
        Rng path(derive_seed(seed, "panel-path", static_cast<std::uint64_t>(u)));
        for (int t = 0; t < years; ++t) {
            panel.rows.push_back({unit_name(u), 2000 + t, x, a});
            double growth;
            do {
                growth = 1.0 + (p.mu - rate) + p.sigma * path.normal();
            } while (growth < 0.02);
            x *= growth;
        }
    }
    return panel;
}

}  // namespace

TEST(FitBeliefs, RecoversShapeParametersWithinThreeSe) {
    BeliefPrior truth = table5_prior();
    Rng rng(derive_seed(42, "beliefs-data"));
    std::vector<double> shares(5000);
    for (auto& s : shares) s = rng.beta(truth.alpha, truth.beta);
    EstimationResult r = fit_beliefs(shares);
    ASSERT_TRUE(r.converged);
    EXPECT_EQ(r.n_obs, 5000);
    EXPECT_NEAR(r.estimates.at("alpha"), truth.alpha, 3.0 * r.std_errors.at("alpha"));
    EXPECT_NEAR(r.estimates.at("beta"), truth.beta, 3.0 * r.std_errors.at("beta"));
    EXPECT_GT(r.std_errors.at("alpha"), 0.0);
    EXPECT_GT(r.std_errors.at("beta"), 0.0);
    EXPECT_GE(r.diagnostics.at("log_likelihood"), r.diagnostics.at("log_likelihood_start"));

    EstimationResult again = fit_beliefs(shares);
    EXPECT_EQ(again.estimates.at("alpha"), r.estimates.at("alpha"));
    EXPECT_EQ(again.std_errors.at("beta"), r.std_errors.at("beta"));
}

TEST(FitBeliefs, BoundarySharesAreClampedWithWarning) {
    Rng rng(derive_seed(42, "beliefs-clamp"));
    std::vector<double> shares(200);
    for (auto& s : shares) s = rng.beta(2.0, 2.0);
    shares[0] = 0.0;
    shares[1] = 1.0;
    EstimationResult r = fit_beliefs(shares);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.diagnostics.at("clamped"), 2.0);
    ASSERT_FALSE(r.warnings.empty());

    EXPECT_THROW(fit_beliefs(std::vector<double>(5, 0.5)), validation_error);
    std::vector<double> bad(50, 0.5);
    bad[3] = -0.2;
    EXPECT_THROW(fit_beliefs(bad), validation_error);
}

TEST(FitGbm, ClosedFormOnTinySample) {
    // two returns: rbar = 0.15, sample variance (ddof 0) = 0.0025
    std::vector<double> r = {0.1, 0.2};
    auto pt = detail::gbm_closed_form(r);
    EXPECT_NEAR(pt.sigma, 0.05, 1e-15);
    EXPECT_NEAR(pt.mu, 0.15 + 0.5 * 0.0025, 1e-15);
}

TEST(FitGbm, RecoversDriftAndVolatilityWithinThreeSe) {
    Panel panel = gbm_panel(300, 21, 42);
    GbmFitOptions opts;
    opts.bootstrap_reps = 800;
    EstimationResult r = fit_gbm(panel, opts);
    ASSERT_TRUE(r.converged);
    EXPECT_EQ(r.n_obs, 300 * 20);
    EXPECT_NEAR(r.estimates.at("mu"), 0.0482, 3.0 * r.std_errors.at("mu"));
    EXPECT_NEAR(r.estimates.at("sigma"), 0.258, 3.0 * r.std_errors.at("sigma"));
    EXPECT_EQ(r.diagnostics.at("n_units"), 300.0);
}

TEST(FitGbm, BootstrapIsDeterministicAndThreadInvariant) {
    Panel panel = gbm_panel(60, 11, 7);
    GbmFitOptions a;
    a.bootstrap_reps = 200;
    a.threads = 1;
    GbmFitOptions b = a;
    b.threads = 4;
    EstimationResult r1 = fit_gbm(panel, a);
    EstimationResult r2 = fit_gbm(panel, b);
    EXPECT_EQ(r1.estimates.at("mu"), r2.estimates.at("mu"));
    EXPECT_EQ(r1.std_errors.at("mu"), r2.std_errors.at("mu"));
    EXPECT_EQ(r1.std_errors.at("sigma"), r2.std_errors.at("sigma"));

    GbmFitOptions c = a;
    c.seed = 1234;
    EstimationResult r3 = fit_gbm(panel, c);
    EXPECT_NE(r3.std_errors.at("mu"), r1.std_errors.at("mu"));
    EXPECT_EQ(r3.estimates.at("mu"), r1.estimates.at("mu"));  // point estimate is seed-free
}

TEST(FitGbm, RowOrderDoesNotMatter) {
    Panel panel = gbm_panel(40, 9, 3);
    Panel shuffled = panel;
    Rng rng(99);
    for (size_t i = shuffled.rows.size(); i > 1; --i)
        std::swap(shuffled.rows[i - 1], shuffled.rows[rng.index(i)]);
    GbmFitOptions opts;
    opts.bootstrap_reps = 100;
    EstimationResult r1 = fit_gbm(panel, opts);
    EstimationResult r2 = fit_gbm(shuffled, opts);
    EXPECT_EQ(r1.estimates.at("mu"), r2.estimates.at("mu"));
    EXPECT_EQ(r1.std_errors.at("sigma"), r2.std_errors.at("sigma"));
}

TEST(FitGbm, SkipsSingletonUnitsAndRejectsDegeneratePanels) {
    Panel panel = gbm_panel(30, 6, 5);
    panel.rows.push_back({"zzz_single", 2000, 55.0, 0.0});
    GbmFitOptions opts;
    opts.bootstrap_reps = 50;
    EstimationResult r = fit_gbm(panel, opts);
    EXPECT_EQ(r.diagnostics.at("skipped_units"), 1.0);
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("zzz_single"), std::string::npos);

    Panel flat;
    for (int t = 0; t < 5; ++t) flat.rows.push_back({"u1", 2000 + t, 50.0, 0.0});
    EXPECT_THROW(fit_gbm(flat, opts), validation_error);
}

TEST(FitGamma, MeanOnlyRecoversCurvatureWithinThreeSe) {
    ModelParams p = table5();
    Panel panel = cleared_panel(546, 24, 42);
    EstimationResult r = fit_gamma(panel, p.mu, p.sigma, p.rho, table5_prior(), p.g2_k2,
                                   GmmMoments::MeanOnly);
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.estimates.at("gamma"), p.gamma, 3.0 * r.std_errors.at("gamma"));
    EXPECT_EQ(r.diagnostics.at("j_stat"), 0.0);  // just identified
    EXPECT_LT(r.diagnostics.at("criterion"), 1e-16);

    EstimationResult again = fit_gamma(panel, p.mu, p.sigma, p.rho, table5_prior(), p.g2_k2,
                                       GmmMoments::MeanOnly);
    EXPECT_EQ(again.estimates.at("gamma"), r.estimates.at("gamma"));
}

TEST(FitGamma, TwoStepGmmReportsOveridentificationStat) {
    ModelParams p = table5();
    Panel panel = cleared_panel(546, 24, 42);
    EstimationResult r = fit_gamma(panel, p.mu, p.sigma, p.rho, table5_prior(), p.g2_k2,
                                   GmmMoments::MeanAndVariance);
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.estimates.at("gamma"), p.gamma, 4.0 * r.std_errors.at("gamma"));
    EXPECT_GE(r.diagnostics.at("j_stat"), 0.0);
    double pv = r.diagnostics.at("j_pvalue");
    EXPECT_GE(pv, 0.0);
    EXPECT_LE(pv, 1.0);
}

TEST(FitGamma, ReportsCriterionProfileWhenBracketHasNoRoot) {
    // drift far above anything the model can rationalize: no sign change
    Panel panel = cleared_panel(80, 12, 11);
    EstimationResult r = fit_gamma(panel, 0.60, 0.258, 0.0487, table5_prior(), 1.0,
                                   GmmMoments::MeanOnly);
    EXPECT_FALSE(r.converged);
    EXPECT_FALSE(r.criterion_profile.empty());
    EXPECT_FALSE(r.warnings.empty());
    EXPECT_TRUE(r.estimates.count("gamma"));  // best scan point still reported
}

TEST(FitGamma, RejectsBadInputs) {
    Panel panel = cleared_panel(20, 6, 2);
    EXPECT_THROW(fit_gamma(panel, 0.05, -0.1, 0.05, table5_prior(), 1.0, GmmMoments::MeanOnly),
                 validation_error);
    EXPECT_THROW(fit_gamma(panel, 0.05, 0.2, -0.05, table5_prior(), 1.0, GmmMoments::MeanOnly),
                 validation_error);
    EXPECT_THROW(fit_gamma(panel, 0.05, 0.2, 0.05, BeliefPrior{-1.0, 1.0}, 1.0,
                           GmmMoments::MeanOnly),
                 validation_error);
    EXPECT_THROW(fit_gamma(panel, 0.05, 0.2, 0.05, table5_prior(), 0.0, GmmMoments::MeanOnly),
                 validation_error);
    GammaFitOptions bad;
    bad.bracket_lo = 5.0;
    bad.bracket_hi = 2.0;
    EXPECT_THROW(fit_gamma(panel, 0.05, 0.2, 0.05, table5_prior(), 1.0, GmmMoments::MeanOnly,
                           bad),
                 validation_error);
}

TEST(LocalLinear, FitsSmoothSignalAndHandlesYearEffects) {
    Rng rng(derive_seed(42, "loclin"));
    const int n = 600;
    std::vector<double> x(n), y(n);
    std::vector<int> years(n);
    for (int i = 0; i < n; ++i) {
        x[i] = rng.uniform();
        years[i] = 2000 + static_cast<int>(rng.index(4));
        double year_effect = 0.3 * (years[i] - 2000);
        y[i] = std::sin(3.0 * x[i]) + year_effect + 0.05 * rng.normal();
    }
    LocalLinearOptions opts;
    opts.years = years;
    opts.eval_points = 25;
    opts.bootstrap_reps = 100;
    LocalLinearFit fit = local_linear_fit(x, y, opts);
    ASSERT_EQ(fit.grid.size(), 25u);
    ASSERT_EQ(fit.fit.size(), 25u);
    EXPECT_GT(fit.bandwidth, 0.0);
    EXPECT_FALSE(fit.cv_profile.empty());

    // compare de-meaned truth against de-meaned fit on interior points
    double offset = 0.0;
    int m = 0;
    for (size_t i = 5; i + 5 < fit.grid.size(); ++i) {
        offset += fit.fit[i] - std::sin(3.0 * fit.grid[i]);
        ++m;
    }
    offset /= m;
    for (size_t i = 5; i + 5 < fit.grid.size(); ++i) {
        EXPECT_NEAR(fit.fit[i] - offset, std::sin(3.0 * fit.grid[i]), 0.08) << fit.grid[i];
        EXPECT_LE(fit.lo[i], fit.hi[i]);
    }

    EXPECT_THROW(local_linear_fit(std::vector<double>(10, 0.5), std::vector<double>(10, 1.0)),
                 validation_error);
    std::vector<double> short_y(n - 1);
    EXPECT_THROW(local_linear_fit(x, short_y), validation_error);
}

TEST(Serialization, EstimationResultRoundTripsThroughJson) {
    Rng rng(derive_seed(42, "ser"));
    std::vector<double> shares(400);
    for (auto& s : shares) s = rng.beta(1.5, 3.0);
    EstimationResult r = fit_beliefs(shares);
    json j = estimation_to_json(r);
    EstimationResult back = estimation_from_json(j);
    EXPECT_EQ(back.estimates.at("alpha"), r.estimates.at("alpha"));
    EXPECT_EQ(back.std_errors.at("beta"), r.std_errors.at("beta"));
    EXPECT_EQ(back.n_obs, r.n_obs);
    EXPECT_EQ(back.converged, r.converged);
    EXPECT_EQ(back.diagnostics.at("log_likelihood"), r.diagnostics.at("log_likelihood"));
}
