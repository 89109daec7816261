#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "seqcal/acquisition.hpp"

using namespace seqcal;
using testing::sine_emulator;
using testing::sine_field;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

AcquisitionContext small_context(const FieldExperiment& fe, std::uint64_t seed,
                                 int n_theta = 7, int n_cand_pair = 3,
                                 int n_cand_explore = 5) {
    Rng rng(seed);
    AcquisitionContext ctx;
    ctx.theta_ref = lhs_sample(n_theta, 1, rng);
    ctx.x_ref = lhs_sample(5, 1, rng);
    for (const auto& z : lhs_sample(12, 2, rng))
        ctx.z_ref.push_back(z);
    ctx.candidates = build_candidates(fe, fe.prior, n_cand_pair, n_cand_explore, rng);
    ctx.theta_hat = VectorXd::Constant(1, 0.45);
    return ctx;
}

// term2 of the expected-variance identity at zero cross-covariance, averaged
// over the reference grid: the score a completely uninformative candidate earns.
double zero_information_score(const Emulator& e, const FieldExperiment& fe,
                              const AcquisitionContext& ctx) {
    const MatrixXd phi0 = MatrixXd::Zero(fe.d(), fe.d());
    double acc = 0.0;
    for (const auto& theta : ctx.theta_ref) {
        const double pr = fe.prior.density(theta);
        if (pr == 0.0) continue;
        const FieldEmulatorMoments fm = e.predict_field(theta, fe.field_x);
        const double term1 =
            std::exp(mvn_logpdf(fe.y, fm.mean, 0.5 * fe.Sigma + fm.cov)) /
            std::exp(fe.d() * std::log(2.0) +
                     0.5 * fe.d() * std::log(M_PI) +
                     0.5 * std::log(fe.Sigma.determinant()));
        acc += pr * pr * (term1 - expected_posterior_var(fm, fe, phi0));
    }
    return acc / static_cast<double>(ctx.theta_ref.size());
}

}  // namespace

TEST_SUITE("acquisition") {

TEST_CASE("candidate list sizes") {
    Rng rng(21);

    SUBCASE("five unique field inputs give 1000 candidates") {
        const FieldExperiment fe = sine_field(100);  // 5 unique x, 2 replicates
        const auto cands = build_candidates(fe, fe.prior, 100, 500, rng);
        CHECK(cands.size() == 1000);
    }

    SUBCASE("nine unique field inputs give 1800 candidates") {
        FieldExperiment fe;
        fe.prior = PriorSpec::uniform(2);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                VectorXd x(2);
                x << 0.25 * (i + 1), 0.25 * (j + 1);
                fe.field_x.push_back(x);
                fe.field_x.push_back(x);  // replicate
            }
        fe.y = VectorXd::Zero(18);
        fe.Sigma = MatrixXd::Identity(18, 18);
        const auto cands = build_candidates(fe, fe.prior, 100, 900, rng);
        CHECK(cands.size() == 1800);
    }

    SUBCASE("zero counts give an empty list") {
        const FieldExperiment fe = sine_field(100);
        CHECK(build_candidates(fe, fe.prior, 0, 0, rng).empty());
    }

    SUBCASE("paired candidates sit exactly on field design inputs") {
        const FieldExperiment fe = sine_field(100);
        const auto cands = build_candidates(fe, fe.prior, 4, 0, rng);
        REQUIRE(cands.size() == 20);
        for (const auto& c : cands) {
            bool on_field = false;
            for (const auto& x : fe.field_x)
                if ((c.design - x).lpNorm<Eigen::Infinity>() == 0.0) on_field = true;
            CHECK(on_field);
        }
    }
}

TEST_CASE("Latin hypercube sampling") {
    Rng rng(22);

    SUBCASE("one point per stratum in every dimension") {
        const int n = 8, dims = 3;
        const auto pts = lhs_sample(n, dims, rng);
        REQUIRE(pts.size() == static_cast<size_t>(n));
        for (int l = 0; l < dims; ++l) {
            std::vector<int> counts(n, 0);
            for (const auto& z : pts) {
                REQUIRE(z(l) >= 0.0);
                REQUIRE(z(l) < 1.0);
                counts[static_cast<int>(z(l) * n)]++;
            }
            for (int s = 0; s < n; ++s) CHECK(counts[s] == 1);
        }
    }

    SUBCASE("single point lands inside the box") {
        const auto pts = lhs_sample(1, 4, rng);
        REQUIRE(pts.size() == 1);
        CHECK((pts[0].array() >= 0.0).all());
        CHECK((pts[0].array() < 1.0).all());
    }

    SUBCASE("deterministic under the same stream") {
        Rng a(7), b(7);
        const auto pa = lhs_sample(16, 2, a);
        const auto pb = lhs_sample(16, 2, b);
        for (size_t i = 0; i < pa.size(); ++i)
            CHECK((pa[i] - pb[i]).lpNorm<Eigen::Infinity>() == 0.0);
    }

    SUBCASE("maximin restart at least matches a plain draw") {
        // The returned design's minimum pairwise distance should never be
        // worse than that of the first of the ten restarts drawn from the
        // same stream.
        Rng a(9), b(9);
        const auto chosen = lhs_sample(20, 2, a);
        auto min_dist = [](const std::vector<VectorXd>& pts) {
            double m = std::numeric_limits<double>::infinity();
            for (size_t i = 0; i < pts.size(); ++i)
                for (size_t j = i + 1; j < pts.size(); ++j)
                    m = std::min(m, (pts[i] - pts[j]).squaredNorm());
            return m;
        };
        // Reproduce the first restart: identical stream prefix.
        MatrixXd first(20, 2);
        {
            std::uniform_real_distribution<double> u01(0.0, 1.0);
            std::vector<int> perm(20);
            for (int l = 0; l < 2; ++l) {
                for (int i = 0; i < 20; ++i) perm[i] = i;
                std::shuffle(perm.begin(), perm.end(), b);
                for (int i = 0; i < 20; ++i) first(i, l) = (perm[i] + u01(b)) / 20.0;
            }
        }
        std::vector<VectorXd> first_pts(20);
        for (int i = 0; i < 20; ++i) first_pts[i] = first.row(i).transpose();
        CHECK(min_dist(chosen) >= min_dist(first_pts));
    }

    SUBCASE("invalid sizes rejected") {
        CHECK_THROWS_AS(lhs_sample(0, 2, rng), std::invalid_argument);
        CHECK_THROWS_AS(lhs_sample(3, 0, rng), std::invalid_argument);
    }
}

TEST_CASE("winner selection") {
    SUBCASE("largest score wins") {
        CHECK(select({{0, 1.0}, {1, 3.0}, {2, 2.0}}) == 1);
    }
    SUBCASE("ties broken by lowest index") {
        CHECK(select({{0, 2.0}, {1, 2.0}, {2, 1.0}}) == 0);
        CHECK(select({{5, 2.0}, {3, 2.0}}) == 3);
    }
    SUBCASE("NaN scores are skipped") {
        CHECK(select({{0, kNan}, {1, 1.0}, {2, kNan}}) == 1);
    }
    SUBCASE("all-NaN raises a failure") {
        CHECK_THROWS_AS(select({{0, kNan}, {1, kNan}}), AcquisitionFailed);
    }
    SUBCASE("empty list rejected") {
        CHECK_THROWS_AS(select({}), std::invalid_argument);
    }
    SUBCASE("selection is invariant to positive rescaling") {
        std::vector<AcquisitionScore> s = {{0, 0.1}, {1, 0.7}, {2, 0.3}};
        const int pick = select(s);
        for (auto& e : s) e.score *= 1e6;
        CHECK(select(s) == pick);
    }
}

TEST_CASE("batched posterior-accuracy scores match the direct evaluation") {
    const Emulator e = sine_emulator(15, 23);
    const FieldExperiment fe = sine_field(101);
    const AcquisitionContext ctx = small_context(fe, 24);

    const auto batched = score_all_Ap(e, fe, ctx, 1);
    REQUIRE(batched.size() == ctx.candidates.size());
    for (size_t i = 0; i < ctx.candidates.size(); ++i) {
        const double naive = score_Ap(e, fe, ctx, ctx.candidates[i]);
        CHECK(batched[i] == doctest::Approx(naive).epsilon(1e-12));
    }

    SUBCASE("thread count does not change the result") {
        const auto threaded = score_all_Ap(e, fe, ctx, 3);
        for (size_t i = 0; i < batched.size(); ++i)
            CHECK(threaded[i] == batched[i]);
    }
}

TEST_CASE("duplicate candidates earn identical scores") {
    const Emulator e = sine_emulator(12, 25);
    const FieldExperiment fe = sine_field(102);
    AcquisitionContext ctx = small_context(fe, 26, 5, 2, 3);
    ctx.candidates.push_back(ctx.candidates[0]);
    const int last = static_cast<int>(ctx.candidates.size()) - 1;

    const auto ap = score_all_Ap(e, fe, ctx, 1);
    CHECK(ap[last] == ap[0]);
    const auto ay = score_all_Ay(e, fe, ctx, nullptr, 1);
    CHECK(ay[last] == ay[0]);
    const auto im = score_all_imspe(e, ctx);
    CHECK(im[last] == im[0]);
}

TEST_CASE("every candidate scores at least the zero-information baseline") {
    const Emulator e = sine_emulator(15, 27);
    const FieldExperiment fe = sine_field(103);
    const AcquisitionContext ctx = small_context(fe, 28, 7, 4, 10);
    const double baseline = zero_information_score(e, fe, ctx);
    const auto scores = score_all_Ap(e, fe, ctx, 1);
    for (double s : scores)
        CHECK(s >= baseline - 1e-10 * std::max(1.0, std::abs(baseline)));
}

TEST_CASE("field-prediction scores") {
    const Emulator e = sine_emulator(15, 29);
    const FieldExperiment fe = sine_field(104);
    AcquisitionContext ctx = small_context(fe, 30, 5, 2, 4);

    SUBCASE("single-reference score matches an independent assembly") {
        const VectorXd x_ref = ctx.x_ref[0];
        AcquisitionContext single = ctx;
        single.x_ref = {x_ref};

        // Independent construction through the public emulator interface:
        // treat field_x plus the reference input as one augmented experiment.
        std::vector<VectorXd> aug_x = fe.field_x;
        aug_x.push_back(x_ref);
        const int d = fe.d();
        const FieldEmulatorMoments fm = e.predict_field(ctx.theta_hat, aug_x);

        FieldExperiment aug;
        aug.prior = fe.prior;
        aug.field_x = aug_x;
        aug.y.resize(d + 1);
        aug.y << fe.y, fm.mean(d);
        aug.Sigma = MatrixXd::Zero(d + 1, d + 1);
        aug.Sigma.topLeftCorner(d, d) = fe.Sigma;
        aug.Sigma(d, d) = fe.Sigma(0, 0);

        const double pr2 = std::pow(fe.prior.density(ctx.theta_hat), 2);
        for (size_t ci = 0; ci < ctx.candidates.size(); ++ci) {
            const MatrixXd phi =
                e.fantasy_cross_cov(ctx.candidates[ci], ctx.theta_hat, aug_x);
            const double term1 =
                std::exp(mvn_logpdf(aug.y, fm.mean, 0.5 * aug.Sigma + fm.cov)) /
                std::exp((d + 1) * std::log(2.0) +
                         0.5 * (d + 1) * std::log(M_PI) +
                         0.5 * std::log(aug.Sigma.determinant()));
            double epv;
            try {
                epv = expected_posterior_var(fm, aug, phi);
            } catch (const NonPositiveDeterminant&) {
                epv = 0.0;
            }
            const double expected = pr2 * (term1 - epv);
            const double got = score_Ay(e, fe, single, ctx.candidates[ci]);
            CHECK(got == doctest::Approx(expected).epsilon(1e-10));
        }
    }

    SUBCASE("duplicated reference rows leave the average unchanged") {
        AcquisitionContext doubled = ctx;
        doubled.x_ref.insert(doubled.x_ref.end(), ctx.x_ref.begin(), ctx.x_ref.end());
        const auto a = score_all_Ay(e, fe, ctx, nullptr, 1);
        const auto b = score_all_Ay(e, fe, doubled, nullptr, 1);
        for (size_t i = 0; i < a.size(); ++i)
            CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
    }

    SUBCASE("pure-noise discrepancy parameters reproduce the default") {
        DiscrepancyParams dp;
        dp.sigma_eps2 = fe.Sigma(0, 0);
        dp.sigma_b2 = 0.0;
        dp.lambda = 1.0;
        const auto a = score_all_Ay(e, fe, ctx, nullptr, 1);
        const auto b = score_all_Ay(e, fe, ctx, &dp, 1);
        for (size_t i = 0; i < a.size(); ++i)
            CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
    }

    SUBCASE("missing plug-in estimate rejected") {
        AcquisitionContext bad = ctx;
        bad.theta_hat = VectorXd();
        CHECK_THROWS_AS(score_all_Ay(e, fe, bad, nullptr, 1), std::invalid_argument);
    }
}

TEST_CASE("predictive-variance baseline is the predictive variance") {
    const Emulator e = sine_emulator(12, 31);
    Rng rng(32);
    for (int i = 0; i < 10; ++i) {
        const JointInput z(testing::random_vec(1, rng), testing::random_vec(1, rng));
        CHECK(score_maxvar(e, z) == e.predict(z).second);
    }
}

TEST_CASE("aggregate-variance scores") {
    const Emulator e = sine_emulator(12, 33);
    const FieldExperiment fe = sine_field(105);
    AcquisitionContext ctx = small_context(fe, 34, 5, 2, 4);

    SUBCASE("singleton reference equal to the candidate: closed form") {
        for (const auto& cand : ctx.candidates) {
            AcquisitionContext single = ctx;
            single.z_ref = {cand.joint()};
            const double v = e.predict(cand).second;
            const double expected = -(v - v * v / (v + e.nugget()));
            CHECK(score_imspe(e, single, cand) ==
                  doctest::Approx(expected).epsilon(1e-10));
        }
    }

    SUBCASE("matches a refit at the same hyperparameters") {
        // Refit oracle: augment the training set with the candidate (any
        // output value; only variances matter) and recompute the reference
        // variances from scratch.
        const JointInput z_star = ctx.candidates[3];
        const int n = e.train_size();
        MatrixXd Z2(n + 1, 2);
        Z2.topRows(n) = e.train_inputs();
        Z2.row(n) = z_star.joint().transpose();
        // Variances do not depend on the outputs, so zeros are fine.
        const VectorXd y2 = VectorXd::Zero(n + 1);
        const testing::ManualGP gp(Z2, y2, e.kernel(), e.output_center(),
                                   e.output_scale());
        double expected = 0.0;
        for (const auto& z : ctx.z_ref) expected -= gp.var(z);
        CHECK(score_imspe(e, ctx, z_star) ==
              doctest::Approx(expected).epsilon(1e-8));
    }

    SUBCASE("empty reference grid rejected") {
        AcquisitionContext bad = ctx;
        bad.z_ref.clear();
        CHECK_THROWS_AS(score_all_imspe(e, bad), std::invalid_argument);
    }
}

}  // TEST_SUITE
