#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gpmin/mc_harness.hpp"
#include "oracles.hpp"

using namespace gpmin;

namespace {

struct Fixture {
    Kernel kernel;
    OptimalSolution sol;
    AsymptoticReport report;
};

Fixture setup(const Kernel &k, Interval iv) {
    OptimalSolution s = solve(k, iv);
    AsymptoticReport r = analyze(k, s);
    return {k, std::move(s), std::move(r)};
}

}  // namespace

TEST(PivotedCholesky, ReproducesMatrix) {
    const Kernel k = Kernel::gaussian();
    const auto pts = uniform_grid(Interval(0.0, 3.0), 201);
    const Eigen::MatrixXd g = covariance_matrix(k, pts);
    const LowRankFactor f = pivoted_cholesky(g);
    EXPECT_LE(f.residual, 1e-8 * g.cwiseAbs().maxCoeff());
    EXPECT_LT(f.rank(), 60);  // smooth kernel: numerically low rank
    EXPECT_EQ(f.jitter, 0.0);
}

TEST(PivotedCholesky, FullRankMatrix) {
    Eigen::MatrixXd g(3, 3);
    g << 4, 2, 0, 2, 3, 1, 0, 1, 2;
    const LowRankFactor f = pivoted_cholesky(g);
    EXPECT_EQ(f.rank(), 3);
    EXPECT_LE((f.factor * f.factor.transpose() - g).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PathGrid, ContainsRequiredPointsAndIsSorted) {
    const std::vector<double> extra{0.123456, 1.1039727, 2.0};
    const PathGrid grid = PathGrid::build(Kernel::gaussian(), Interval(0.0, 2.2), 201, extra);
    EXPECT_TRUE(std::is_sorted(grid.points.begin(), grid.points.end()));
    for (double t : extra) { EXPECT_EQ(grid.points[grid.index_of(t)], t); }
    EXPECT_EQ(grid.points.front(), 0.0);
    EXPECT_EQ(grid.points.back(), 2.2);
    EXPECT_THROW(PathGrid::build(Kernel::gaussian(), Interval(0.0, 1.0), 11, std::vector<double>{1.5}), InvalidArgument);
}

TEST(SamplePaths, MarginalVarianceAndCovariance) {
    const Kernel k = Kernel::gaussian();
    const PathGrid grid = PathGrid::build(k, Interval(0.0, 1.0), 21);
    const Eigen::MatrixXd x = sample_paths(grid, 100000, 42);
    const double n = static_cast<double>(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        EXPECT_NEAR(x.row(i).squaredNorm() / n, 1.0, 0.03);
    }
    const double cov = x.row(0).dot(x.row(x.rows() - 1)) / n;
    EXPECT_NEAR(cov / std::exp(-0.5), 1.0, 0.03);
}

TEST(SamplePaths, DeterministicAcrossRunsAndThreads) {
    const PathGrid grid = PathGrid::build(Kernel::sinc(), Interval(0.0, 6.0), 51);
    const Eigen::MatrixXd a = sample_paths(grid, 20000, 9, 1);
    const Eigen::MatrixXd b = sample_paths(grid, 20000, 9, 4);
    const Eigen::MatrixXd c = sample_paths(grid, 20000, 10, 1);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
}

TEST(TiltedSampler, LikelihoodRatioIdentity) {
    const Fixture s = setup(Kernel::gaussian(), Interval(0.0, 3.0));
    const PathGrid grid = PathGrid::build(s.kernel, s.sol.interval, 31, s.report.essential.locations());
    const TiltedSampler sampler(s.kernel, grid, s.report);
    const Eigen::LLT<Eigen::MatrixXd> llt(s.report.sigma);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    for (double u : {0.5, 3.0, 5.0}) {
        const Eigen::VectorXd shifted_mean = Eigen::VectorXd::Constant(3, u);
        for (int rep = 0; rep < 100; ++rep) {
            Eigen::VectorXd xi(3);
            for (int i = 0; i < 3; ++i) { xi(i) = normal(rng); }
            const Eigen::VectorXd x = shifted_mean + llt.matrixL() * xi;
            const double lhs = sampler.log_likelihood_ratio(u, x) + gaussian_log_density(llt, shifted_mean, x);
            const double rhs = gaussian_log_density(llt, Eigen::VectorXd::Zero(3), x);
            EXPECT_NEAR(std::exp(lhs - rhs), 1.0, 1e-12);
        }
    }
}

TEST(TiltedSampler, MeanMapReproducesMuAndPinsSupport) {
    const Fixture s = setup(Kernel::gaussian(), Interval(0.0, 3.0));
    const PathGrid grid = PathGrid::build(s.kernel, s.sol.interval, 31, s.report.essential.locations());
    const TiltedSampler sampler(s.kernel, grid, s.report);
    const MuFunction mu(s.kernel, s.sol);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(sampler.mu()(static_cast<Eigen::Index>(i)), mu(grid.points[i]), 1e-10);
    }
    for (std::size_t j : sampler.support_index()) {
        EXPECT_EQ(sampler.z_factor().factor.row(static_cast<Eigen::Index>(j)).cwiseAbs().sum(), 0.0);
    }
}

TEST(ImportanceSampling, NoConstraintGivesProbabilityOne) {
    const Fixture s = setup(Kernel::gaussian(), Interval(0.0, 1.0));
    const PathGrid grid = PathGrid::build(s.kernel, s.sol.interval, 201, s.report.essential.locations());
    MCOptions mo;
    mo.n = 20000;
    const MCReport r = is_estimate(s.kernel, grid, s.report, -10.0, mo);
    EXPECT_NEAR(r.p_hat, 1.0, 1e-6);
    EXPECT_TRUE(std::isnan(r.formula_value));
}

TEST(ImportanceSampling, SupportOnlyGridMatchesOrthantOracle) {
    for (double b : {1.0, 3.0}) {
        const Fixture s = setup(Kernel::gaussian(), Interval(0.0, b));
        const PathGrid grid = PathGrid::build(s.kernel, s.sol.interval, 2, s.report.support);
        ASSERT_EQ(grid.points, s.report.support);
        for (double u : {2.0, 3.0, 4.0}) {
            MCOptions mo;
            mo.n = 200000;
            mo.seed = 77;
            const MCReport r = is_estimate(s.kernel, grid, s.report, u, mo);
            const double exact = oracle::orthant(oracle::gram(oracle::gaussian, s.report.support), u);
            const double half = 0.5 * (r.ci_hi - r.ci_lo);
            EXPECT_NEAR(r.p_hat, exact, 3.0 * half) << "b=" << b << " u=" << u;
        }
    }
}

TEST(ImportanceSampling, ReportInvariants) {
    const Fixture s = setup(Kernel::gaussian(), Interval(0.0, 3.0));
    const PathGrid grid = PathGrid::build(s.kernel, s.sol.interval, 101, s.report.essential.locations());
    MCOptions mo;
    mo.n = 50000;
    for (double u : {2.0, 4.0}) {
        const MCReport r = is_estimate(s.kernel, grid, s.report, u, mo);
        EXPECT_LE(r.ci_lo, r.p_hat);
        EXPECT_LE(r.p_hat, r.ci_hi);
        EXPECT_LE(r.ess, static_cast<double>(r.n));
        double total = r.argmin.off_atom;
        for (double f : r.argmin.frequencies) { total += f; }
        EXPECT_NEAR(total, 1.0, 1e-9);
        EXPECT_EQ(r.seed, mo.seed);
        EXPECT_EQ(r.grid_m, static_cast<int>(grid.size()));
    }
}

TEST(ImportanceSampling, LowEssWarning) {
    const Fixture s = setup(Kernel::gaussian(), Interval(0.0, 1.0));
    const PathGrid grid = PathGrid::build(s.kernel, s.sol.interval, 51, s.report.essential.locations());
    MCOptions mo;
    mo.n = 1000;
    const MCReport r = is_estimate(s.kernel, grid, s.report, 5.0, mo);
    EXPECT_TRUE(r.warning.low_ess);
}

TEST(ImportanceSampling, DeterministicAcrossThreads) {
    const Fixture s = setup(Kernel::gaussian(), Interval(0.0, 1.0));
    const PathGrid grid = PathGrid::build(s.kernel, s.sol.interval, 51, s.report.essential.locations());
    MCOptions one;
    one.n = 40000;
    one.threads = 1;
    MCOptions four = one;
    four.threads = 4;
    const MCReport a = is_estimate(s.kernel, grid, s.report, 3.0, one);
    const MCReport b = is_estimate(s.kernel, grid, s.report, 3.0, four);
    EXPECT_EQ(a.p_hat, b.p_hat);
    EXPECT_EQ(a.ess, b.ess);
    EXPECT_EQ(a.overshoot.mean, b.overshoot.mean);
}

TEST(ImportanceSampling, RefusesDegenerateConfiguration) {
    const Kernel k = Kernel::gaussian();
    const double c2 = breakpoint_solve(k, Breakpoint::C2);
    const Fixture s = setup(k, Interval(0.0, c2));
    const PathGrid grid = PathGrid::build(k, s.sol.interval, 51, s.report.essential.locations());
    MCOptions mo;
    mo.n = 1000;
    EXPECT_THROW(is_estimate(k, grid, s.report, 4.0, mo), DegenerateConfiguration);
    EXPECT_THROW(qw_reference_sample(k, grid, s.report, 1000, 1), DegenerateConfiguration);
}

TEST(ConditionalSamples, WeightsAreNormalized) {
    const Fixture s = setup(Kernel::gaussian(), Interval(0.0, 1.0));
    const PathGrid grid = PathGrid::build(s.kernel, s.sol.interval, 51, s.report.essential.locations());
    MCOptions mo;
    mo.n = 30000;
    const ConditionalEnsemble e = conditional_samples(s.kernel, grid, s.report, 4.0, mo);
    double total = 0.0;
    for (double w : e.weights) { total += w; }
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (const auto &smp : e.samples) { EXPECT_GT(smp.overshoot, 0.0); }
    EXPECT_EQ(e.fluctuation_mean.size(), static_cast<Eigen::Index>(grid.size()));
    // the fluctuation X - u mu is pinned only through X_S; at the support it is X_S - u
    EXPECT_GE(e.fluctuation_mean(0), 0.0);
}

TEST(ConditionalSamples, OvershootAndArgminLaws) {
    const Fixture s = setup(Kernel::gaussian(), Interval(0.0, 1.0));
    const PathGrid grid = PathGrid::build(s.kernel, s.sol.interval, 201, s.report.essential.locations());
    MCOptions mo;
    mo.n = 400000;
    const MCReport r = is_estimate(s.kernel, grid, s.report, 5.0, mo);
    EXPECT_NEAR(r.overshoot.mean / s.report.v_star, 1.0, 0.1);
    EXPECT_NEAR(r.argmin.frequencies[0], 0.5, 0.05);
    EXPECT_NEAR(r.argmin.frequencies[1], 0.5, 0.05);
    EXPECT_LE(r.max_atom_correlation, 0.1);
}

TEST(ConditionalSamples, OvershootKsDecreasesWithLevel) {
    const Fixture s = setup(Kernel::gaussian(), Interval(0.0, 1.0));
    const PathGrid grid = PathGrid::build(s.kernel, s.sol.interval, 201, s.report.essential.locations());
    MCOptions mo;
    mo.n = 400000;
    double last = INFINITY;
    for (double u : {3.0, 4.0, 5.0}) {
        const MCReport r = is_estimate(s.kernel, grid, s.report, u, mo);
        EXPECT_LT(r.overshoot.ks, last) << u;
        last = r.overshoot.ks;
    }
}

TEST(QwReference, EmptyFieldLeavesResidualLawUnchanged) {
    const Fixture s = setup(Kernel::gaussian(), Interval(0.0, 1.0));
    const PathGrid grid = PathGrid::build(s.kernel, s.sol.interval, 51, s.report.essential.locations());
    const QwEnsemble q = qw_reference_sample(s.kernel, grid, s.report, 100000, 3);
    EXPECT_EQ(q.mean_w, 1.0);
    EXPECT_LE((q.weighted_mean - q.plain_mean).cwiseAbs().maxCoeff(), 1e-12);
    // pointwise |mean| within 4 standard errors of zero
    for (Eigen::Index i = 0; i < q.weighted_mean.size(); ++i) {
        EXPECT_LE(std::abs(q.weighted_mean(i)), 4.0 * std::sqrt(q.weighted_var(i) / 100000.0) + 1e-15);
    }
}

TEST(QwReference, LevelIndicatorGivesHalfNormalMean) {
    const Kernel k = Kernel::gaussian();
    const Fixture s = setup(k, Interval(0.0, breakpoint_solve(k, Breakpoint::C1)));
    const PathGrid grid = PathGrid::build(k, s.sol.interval, 101, s.report.essential.locations());
    const long n = 400000;
    const QwEnsemble q = qw_reference_sample(k, grid, s.report, n, 5);
    const double mid = s.report.essential.points[2].t;
    const auto idx = static_cast<Eigen::Index>(grid.index_of(mid));
    ASSERT_EQ(grid.points[static_cast<std::size_t>(idx)], mid);
    // sigma^2 = Var(Z_{b/2}) by an independent Schur complement
    const std::vector<double> atoms = s.report.support;
    const Eigen::MatrixXd sigma = oracle::gram(oracle::gaussian, atoms);
    Eigen::Vector2d r(oracle::gaussian(mid - atoms[0]), oracle::gaussian(mid - atoms[1]));
    const double sd = std::sqrt(1.0 - r.dot(sigma.inverse() * r));
    const double se = std::sqrt(q.weighted_var(idx) / q.ess);
    EXPECT_NEAR(q.weighted_mean(idx), oracle::half_normal_mean(sd), 4.0 * se);
    EXPECT_NEAR(q.mean_w, 0.5, q.ci_half_width + 1e-12);
}

TEST(QwReference, MeanWeightAgreesWithExpectedW) {
    const Fixture s = setup(Kernel::gaussian(), Interval(0.0, 3.0));
    const PathGrid grid = PathGrid::build(s.kernel, s.sol.interval, 101, s.report.essential.locations());
    const QwEnsemble q = qw_reference_sample(s.kernel, grid, s.report, 200000, 8);
    EXPECT_NEAR(q.mean_w, s.report.expected_w.mean, q.ci_half_width + s.report.expected_w.ci_half_width);
}
