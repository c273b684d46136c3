#include <catch2/catch_amalgamated.hpp>
#include <set>

#include "fisst/association.hpp"
#include "helpers.hpp"

using namespace fisst;
using fisst::testutil::birth_1d;
using fisst::testutil::meas_1d;
using fisst::testutil::vec1;
using Catch::Matchers::WithinAbs;

TEST_CASE("association enumeration: small cases by hand") {
    auto a11 = enumerate_associations(1, 1);
    REQUIRE(a11.size() == 2); // {phi} and {0}
    REQUIRE(a11[0].target_to_meas == std::vector<int>{kNullAssoc});
    REQUIRE(a11[1].target_to_meas == std::vector<int>{0});

    REQUIRE(enumerate_associations(2, 2).size() == 7);
    REQUIRE(enumerate_associations(0, 3).size() == 1);
    REQUIRE(enumerate_associations(0, 3)[0].clutter_count(3) == 3);
}

TEST_CASE("association count matches enumeration") {
    REQUIRE(count_associations(2, 2) == 7);
    REQUIRE(count_associations(3, 2) == 13);
    REQUIRE(count_associations(0, 0) == 1);
    for (int n = 0; n <= 6; ++n)
        for (int m = 0; m <= 6; ++m)
            REQUIRE(count_associations(n, m) == enumerate_associations(n, m).size());
}

TEST_CASE("association count overflow guard") {
    REQUIRE_THROWS_AS(count_associations(30, 30, 1'000'000), ExplosionError);
}

TEST_CASE("assigned measurement indices are pairwise distinct") {
    for (const auto& a : enumerate_associations(3, 3)) {
        std::set<int> seen;
        for (int j : a.target_to_meas) {
            if (j == kNullAssoc) continue;
            REQUIRE(!seen.count(j));
            seen.insert(j);
        }
        REQUIRE(a.clutter_count(3) == 3 - static_cast<int>(seen.size()));
    }
}

TEST_CASE("gated enumeration is a subset; trivial gate changes nothing") {
    const auto all = enumerate_associations(3, 3);
    const auto gated = enumerate_associations(3, 3, [](int t, int j) { return (t + j) % 2 == 0; });
    REQUIRE(gated.size() < all.size());
    std::set<std::vector<int>> universe;
    for (const auto& a : all) universe.insert(a.target_to_meas);
    for (const auto& a : gated) REQUIRE(universe.count(a.target_to_meas));

    const auto open = enumerate_associations(3, 3, [](int, int) { return true; });
    REQUIRE(open.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        REQUIRE(open[i].target_to_meas == all[i].target_to_meas);
}

TEST_CASE("enumeration order is deterministic across runs") {
    const auto a = enumerate_associations(3, 2);
    const auto b = enumerate_associations(3, 2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        REQUIRE(a[i].target_to_meas == b[i].target_to_meas);
}

TEST_CASE("birth hypotheses: all-pixel policy") {
    BirthModel b3 = birth_1d(0.0, 3.0, 3, 0.1);
    auto hyps = enumerate_birth_hypotheses(b3, {}, BirthEnumerationPolicy::all_pixels(1));
    REQUIRE(hyps.size() == 4);
    REQUIRE(hyps[0].pixels.empty());
    REQUIRE(hyps[1].pixels == std::vector<int>{0});
    REQUIRE(hyps[2].pixels == std::vector<int>{1});
    REQUIRE(hyps[3].pixels == std::vector<int>{2});

    BirthModel b2 = birth_1d(0.0, 2.0, 2, 0.1);
    auto hyps2 = enumerate_birth_hypotheses(b2, {}, BirthEnumerationPolicy::all_pixels(2));
    REQUIRE(hyps2.size() == 4);
    REQUIRE(hyps2[3].pixels == std::vector<int>{0, 1});
}

TEST_CASE("birth hypotheses: measurement-gated policy") {
    // 4 pixels on [0,4); measurements sit in pixels 1 and 3
    BirthModel b = birth_1d(0.0, 4.0, 4, 0.1);
    MeasurementModel meas = meas_1d(1.0, 0.01, 0.9);
    std::vector<Eigen::VectorXd> zs{vec1(1.5), vec1(3.5)};
    auto hyps =
        enumerate_birth_hypotheses(b, zs, BirthEnumerationPolicy::measurement_gated(2), &meas);
    REQUIRE(hyps.size() == 4);
    REQUIRE(hyps[0].pixels.empty());
    REQUIRE(hyps[1].pixels == std::vector<int>{1});
    REQUIRE(hyps[2].pixels == std::vector<int>{3});
    REQUIRE(hyps[3].pixels == std::vector<int>{1, 3});
}

TEST_CASE("birth hypothesis explosion guard") {
    BirthModel b = birth_1d(0.0, 1.0, 30, 0.01);
    REQUIRE_THROWS_AS(
        enumerate_birth_hypotheses(b, {}, BirthEnumerationPolicy::all_pixels(5, 100)),
        ExplosionError);
}

TEST_CASE("survival enumeration") {
    REQUIRE(enumerate_survival(0).size() == 1);
    REQUIRE(enumerate_survival(2).size() == 4);

    SurvivalModel surv{0.82};
    double total = 0.0;
    for (const auto& s : enumerate_survival(3)) total += survival_prior(s.count(), 3, surv);
    REQUIRE_THAT(total, WithinAbs(1.0, 1e-12));

    // binomial identity holds for every r up to the desk-scale cap
    for (int r = 0; r <= 12; ++r) {
        double sum = 0.0;
        for (const auto& s : enumerate_survival(r)) sum += survival_prior(s.count(), r, surv);
        REQUIRE_THAT(sum, WithinAbs(1.0, 1e-12));
    }

    REQUIRE_THROWS_AS(enumerate_survival(30), ExplosionError);
}

TEST_CASE("ellipsoidal gate") {
    const auto gate = EllipsoidalGate::from_probability(0.999, 1);
    GaussianBelief b(vec1(0.0), testutil::mat1(1.0));
    MeasurementModel meas = meas_1d(1.0, 1.0, 0.9);
    REQUIRE(gate.pass(b, vec1(0.5), meas));
    REQUIRE(!gate.pass(b, vec1(50.0), meas));
    // 0.999 quantile of chi2(1) is about 10.83
    REQUIRE_THAT(chi2_quantile(1, 0.999), WithinAbs(10.8276, 1e-3));
}
