#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fisst/belief.hpp"
#include "fisst/models.hpp"
#include "helpers.hpp"

using namespace fisst;
using fisst::testutil::birth_1d;
using fisst::testutil::meas_1d;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("association prior matches direct evaluation") {
    ClutterModel c1{1.0, 1.0}; // lambda V = 1
    REQUIRE_THAT(association_prior(2, 3, 2, meas_1d(1, 1, 0.9), c1),
                 WithinRel(0.0165545748527149, 1e-12));

    ClutterModel c0{0.0, 1.0};
    REQUIRE(association_prior(0, 0, 0, meas_1d(1, 1, 0.9), c0) == 1.0);

    ClutterModel c2{2.0, 1.0}; // lambda V = 2
    REQUIRE_THAT(association_prior(1, 1, 1, meas_1d(1, 1, 0.9), c2),
                 WithinRel(0.027067056647322535, 1e-12));
}

TEST_CASE("association prior rejects more detections than targets") {
    ClutterModel c{1.0, 1.0};
    REQUIRE_THROWS_AS(association_prior(2, 4, 1, meas_1d(1, 1, 0.9), c), DimensionError);
    REQUIRE_THROWS_AS(association_prior(2, 3, 4, meas_1d(1, 1, 0.9), c), RangeError);
    REQUIRE_THROWS_AS(association_prior(2, 3, -1, meas_1d(1, 1, 0.9), c), RangeError);
}

TEST_CASE("association prior handles boundary detection probabilities") {
    ClutterModel c{0.0, 1.0};
    // p_d = 1: any missed target kills the hypothesis, none missed is fine
    REQUIRE(association_prior(2, 2, 0, meas_1d(1, 1, 1.0), c) == 1.0);
    REQUIRE(association_prior(2, 1, 0, meas_1d(1, 1, 1.0), c) == 0.0);
    // lambda V = 0 with clutter assigned
    REQUIRE(association_prior(1, 2, 1, meas_1d(1, 1, 1.0), c) == 0.0);
}

TEST_CASE("birth prior matches direct evaluation") {
    REQUIRE_THAT(birth_prior(0, birth_1d(0, 1, 100, 0.01)), WithinRel(0.3660323412732292, 1e-12));
    REQUIRE_THAT(birth_prior(1, birth_1d(0, 1, 100, 0.01)),
                 WithinRel(0.0036972963764972644, 1e-12));
    REQUIRE(birth_prior(0, birth_1d(0, 1, 100, 0.0)) == 1.0);
    REQUIRE_THROWS_AS(birth_prior(101, birth_1d(0, 1, 100, 0.01)), RangeError);
}

TEST_CASE("poisson-limit birth prior") {
    // lambda_b V = 1 with M = 100 pixels
    BirthModel b = birth_1d(0.0, 1.0, 100, 0.01, true);
    REQUIRE_THAT(birth_prior_poisson_limit(0, b), WithinRel(0.36787944117144233, 1e-12));
    REQUIRE_THAT(birth_prior_poisson_limit(1, b), WithinRel(0.0036787944117144234, 1e-12));

    BirthModel none = birth_1d(0.0, 1.0, 100, 0.0);
    REQUIRE(birth_prior_poisson_limit(0, none) == 1.0);
}

TEST_CASE("survival prior") {
    REQUIRE(survival_prior(2, 2, SurvivalModel{1.0}) == 1.0);
    REQUIRE_THAT(survival_prior(1, 2, SurvivalModel{0.95}), WithinRel(0.0475, 1e-12));
    REQUIRE_THAT(survival_prior(0, 3, SurvivalModel{0.9}), WithinRel(0.001, 1e-12));
    REQUIRE_THROWS_AS(survival_prior(3, 2, SurvivalModel{0.5}), RangeError);
}

TEST_CASE("birth pdf: uniform box and moment-matched gaussian") {
    BirthModel b = birth_1d(0.0, 1.0, 1, 0.1);

    const auto box = std::get<BoxBelief>(birth_pdf(0, b, BirthBeliefMode::uniform));
    REQUIRE(box.lo(0) == 0.0);
    REQUIRE(box.hi(0) == 1.0);
    REQUIRE_THAT(box.volume(), WithinAbs(1.0, 1e-15)); // density 1/volume integrates to 1

    const auto g = std::get<GaussianBelief>(birth_pdf(0, b, BirthBeliefMode::gaussian_moment_match));
    REQUIRE_THAT(g.mean(0), WithinAbs(0.5, 1e-15));
    REQUIRE_THAT(g.cov(0, 0), WithinRel(1.0 / 12.0, 1e-12));

    // 2-D pixel of volume 4 (one 2x2 pixel): density 1/4 inside
    BirthModel b2;
    b2.fov_min = Eigen::Vector2d(0.0, 0.0);
    b2.fov_max = Eigen::Vector2d(2.0, 2.0);
    b2.pixels_per_axis = Eigen::VectorXi::Ones(2);
    b2.alpha = 0.1;
    const auto box2 = std::get<BoxBelief>(birth_pdf(0, b2, BirthBeliefMode::uniform));
    REQUIRE_THAT(1.0 / box2.volume(), WithinAbs(0.25, 1e-15));

    REQUIRE_THROWS_AS(birth_pdf(1, b2, BirthBeliefMode::uniform), RangeError);
}

TEST_CASE("birth pixel geometry") {
    BirthModel b;
    b.fov_min = Eigen::Vector2d(-1.0, 0.0);
    b.fov_max = Eigen::Vector2d(1.0, 3.0);
    b.pixels_per_axis = Eigen::VectorXi(2);
    b.pixels_per_axis << 2, 3;
    b.alpha = 0.01;
    REQUIRE(b.pixel_count() == 6);
    REQUIRE_THAT(b.pixel_volume(), WithinRel(1.0, 1e-12));
    REQUIRE_THAT(b.fov_volume(), WithinRel(6.0, 1e-12));
    // last axis fastest: pixel 4 = (x-cell 1, y-cell 1)
    REQUIRE(b.pixel_lo(4).isApprox(Eigen::Vector2d(0.0, 1.0)));
    REQUIRE(b.pixel_hi(4).isApprox(Eigen::Vector2d(1.0, 2.0)));
    REQUIRE(b.pixel_index_of(Eigen::Vector2d(0.5, 1.5)) == 4);
    REQUIRE(b.pixel_index_of(Eigen::Vector2d(5.0, 1.5)) == -1);
}

TEST_CASE("binomial birth priors over all hypotheses sum to one") {
    for (int M : {1, 4, 12}) {
        BirthModel b = birth_1d(0.0, 1.0, M, 0.13);
        double total = 0.0;
        for (int p = 0; p <= M; ++p) {
            double c = 1.0;
            for (int i = 0; i < p; ++i) c = c * (M - i) / (i + 1);
            total += c * birth_prior(p, b);
        }
        REQUIRE_THAT(total, WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("binomial birth prior converges to the poisson limit") {
    const int M = 100000;
    const double lambda_v = 1.0;
    BirthModel b = birth_1d(0.0, 1.0, M, lambda_v / M, true);
    for (int p : {0, 1, 2}) {
        const double binom = birth_prior(p, b);
        const double poisson = birth_prior_poisson_limit(p, b);
        REQUIRE_THAT(binom, WithinRel(poisson, 1e-3));
    }
}

TEST_CASE("association priors with subset multiplicities sum to one") {
    // Sum over detection subsets (C(n,d) of them) and clutter counts k.
    MeasurementModel meas = meas_1d(1, 1, 0.83);
    ClutterModel clutter{1.7, 2.0};
    for (int n : {0, 1, 3}) {
        double total = 0.0;
        for (int d = 0; d <= n; ++d) {
            double c = 1.0;
            for (int i = 0; i < d; ++i) c = c * (n - i) / (i + 1);
            for (int k = 0; k <= 120; ++k) total += c * association_prior(n, d + k, k, meas, clutter);
        }
        REQUIRE_THAT(total, WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("log-domain priors agree with linear evaluation") {
    MeasurementModel meas = meas_1d(1, 1, 0.7);
    ClutterModel clutter{0.5, 3.0};
    BirthModel b = birth_1d(-2.0, 2.0, 8, 0.05);
    SurvivalModel s{0.93};
    REQUIRE_THAT(std::log(association_prior(3, 4, 2, meas, clutter)),
                 WithinAbs(log_association_prior(3, 4, 2, meas, clutter), 1e-12));
    REQUIRE_THAT(std::log(birth_prior(2, b)), WithinAbs(log_birth_prior(2, b), 1e-12));
    REQUIRE_THAT(std::log(survival_prior(1, 3, s)), WithinAbs(log_survival_prior(1, 3, s), 1e-12));
    REQUIRE(association_prior(3, 4, 2, meas, clutter) >= 0.0);
}

TEST_CASE("model validation catches bad parameters") {
    MotionModel bad_q = testutil::motion_1d(1.0, -1.0);
    REQUIRE_THROWS_AS(bad_q.validate(), NumericalError);

    MeasurementModel bad_pd = meas_1d(1, 1, 1.5);
    REQUIRE_THROWS_AS(bad_pd.validate(), RangeError);

    ClutterModel bad_v{0.1, 0.0};
    REQUIRE_THROWS_AS(bad_v.validate(), RangeError);

    BirthModel mismatched = birth_1d(0, 1, 10, 0.01, true);
    mismatched.lambda_b *= 2.0;
    REQUIRE_THROWS_AS(mismatched.validate(), RangeError);

    SurvivalModel bad_beta{-0.1};
    REQUIRE_THROWS_AS(bad_beta.validate(), RangeError);
}
