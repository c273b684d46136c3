#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fisst/hypothesis.hpp"
#include "fisst/pruning.hpp"
#include "helpers.hpp"

using namespace fisst;
using fisst::testutil::mat1;
using fisst::testutil::models_1d;
using fisst::testutil::vec1;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

HypothesisForest weighted_forest(std::initializer_list<double> weights) {
    HypothesisForest f;
    int k = 0;
    for (double w : weights) {
        Hypothesis h;
        h.tracks.push_back(
            Track{TrackLabel::initial_target(k), GaussianBelief(vec1(double(k)), mat1(1.0))});
        h.log_weight = std::log(w);
        f.hypotheses.push_back(std::move(h));
        ++k;
    }
    return f;
}

} // namespace

TEST_CASE("top-K pruning renormalizes the survivors") {
    auto f = weighted_forest({0.6, 0.3, 0.1});
    PruningPolicy policy;
    policy.max_hypotheses = 2;
    PruneReport rep;
    auto pruned = prune(f, policy, &rep);
    REQUIRE(pruned.hypotheses.size() == 2);
    REQUIRE_THAT(std::exp(pruned.hypotheses[0].log_weight), WithinRel(0.6 / 0.9, 1e-12));
    REQUIRE_THAT(std::exp(pruned.hypotheses[1].log_weight), WithinRel(0.3 / 0.9, 1e-12));
    REQUIRE_THAT(rep.dropped_mass, WithinAbs(0.1, 1e-12));
    REQUIRE(rep.dropped_over_cap == 1);
}

TEST_CASE("weight-threshold pruning") {
    auto f = weighted_forest({0.9, 0.06, 0.04});
    PruningPolicy policy;
    policy.min_weight = 0.05;
    PruneReport rep;
    auto pruned = prune(f, policy, &rep);
    REQUIRE(pruned.hypotheses.size() == 2);
    REQUIRE_THAT(std::exp(pruned.hypotheses[0].log_weight), WithinRel(0.9 / 0.96, 1e-12));
    REQUIRE_THAT(rep.dropped_mass, WithinAbs(0.04, 1e-12));
}

TEST_CASE("no-op policy keeps the forest, reports zero dropped mass") {
    auto f = weighted_forest({0.5, 0.3, 0.2});
    auto pruned = prune(f, PruningPolicy::none());
    REQUIRE(pruned.hypotheses.size() == 3);
    REQUIRE_THAT(pruning_error_bound(f, PruningPolicy::none()), WithinAbs(0.0, 1e-15));
    for (std::size_t i = 0; i < 3; ++i)
        REQUIRE_THAT(std::exp(pruned.hypotheses[i].log_weight),
                     WithinAbs(std::exp(f.hypotheses[i].log_weight), 1e-12));
}

TEST_CASE("pruning is idempotent and survivors are deterministically ordered") {
    auto f = weighted_forest({0.35, 0.05, 0.25, 0.35});
    PruningPolicy policy;
    policy.max_hypotheses = 3;
    policy.min_weight = 0.1;
    auto once = prune(f, policy);
    auto twice = prune(once, policy);
    REQUIRE(once.hypotheses.size() == twice.hypotheses.size());
    for (std::size_t i = 0; i < once.hypotheses.size(); ++i) {
        REQUIRE(once.hypotheses[i].key_string() == twice.hypotheses[i].key_string());
        REQUIRE_THAT(once.hypotheses[i].log_weight,
                     WithinAbs(twice.hypotheses[i].log_weight, 1e-14));
    }
    for (std::size_t i = 1; i < once.hypotheses.size(); ++i)
        REQUIRE(once.hypotheses[i - 1].log_weight >= once.hypotheses[i].log_weight);
    REQUIRE_THAT(once.total_weight(), WithinAbs(1.0, 1e-9));
}

TEST_CASE("the last hypothesis is never removed") {
    auto f = weighted_forest({1.0});
    PruningPolicy policy;
    policy.min_weight = 0.9999; // would drop everything after renormalization rounding
    f.hypotheses[0].log_weight = std::log(0.5);
    auto pruned = prune(f, policy);
    REQUIRE(pruned.hypotheses.size() == 1);
    REQUIRE_THAT(std::exp(pruned.hypotheses[0].log_weight), WithinAbs(1.0, 1e-12));
}

TEST_CASE("undetected-birth hypotheses are dropped first and always sort below their partner") {
    ScenarioModels models = models_1d(1.0, 0.0, 1e-6, 0.95, 0.01, -10, 10, 4, 0.004, 1.0, true,
                                      BirthBeliefMode::uniform);
    HypothesisForest forest = initial_forest({GaussianBelief(vec1(-7.5), mat1(0.04))});
    StepOptions opts;
    opts.birth_policy = BirthEnumerationPolicy::all_pixels(1);
    auto stepped = fisst_step(forest, {vec1(-7.4), vec1(2.5)}, models, opts);

    // pair up: for every undetected-birth hypothesis find the same hypothesis
    // without the undetected birth; the partner always outweighs it
    const auto weights = forest_weight_map(stepped);
    std::size_t pairs = 0;
    for (const auto& h : stepped.hypotheses) {
        if (!hypothesis_has_undetected_birth(h)) continue;
        Hypothesis partner;
        partner.log_weight = 0.0;
        for (const auto& t : h.tracks)
            if (!t.label.undetected_at_creation()) partner.tracks.push_back(t);
        partner.canonicalize();
        const auto it = weights.find(partner.key_string());
        if (it == weights.end()) continue;
        ++pairs;
        REQUIRE(it->second > std::exp(h.log_weight));
        REQUIRE_THAT(std::exp(h.log_weight) / it->second,
                     WithinRel(undetected_birth_ratio(models), 1e-9));
    }
    REQUIRE(pairs > 0);

    PruningPolicy drop;
    drop.drop_undetected_births = true;
    PruneReport rep;
    auto cleaned = prune(stepped, drop, &rep);
    REQUIRE(rep.dropped_undetected_births > 0);
    for (const auto& h : cleaned.hypotheses) REQUIRE(!hypothesis_has_undetected_birth(h));
    REQUIRE_THAT(cleaned.total_weight(), WithinAbs(1.0, 1e-9));
}

TEST_CASE("undetected-birth weight ratio value") {
    ScenarioModels models = models_1d(1.0, 0.1, 1.0, 0.9, 0.0, -10, 10, 4, 0.01);
    REQUIRE_THAT(undetected_birth_ratio(models), WithinRel(0.001, 1e-12));
    models.measurement.p_d = 1.0;
    REQUIRE(undetected_birth_ratio(models) == 0.0);
    models.measurement.p_d = 0.5;
    models.birth.alpha = 0.1;
    REQUIRE_THAT(undetected_birth_ratio(models), WithinRel(0.05, 1e-12));
}

TEST_CASE("pruning policy validation") {
    PruningPolicy bad;
    bad.max_hypotheses = 0;
    REQUIRE_THROWS_AS(bad.validate(), RangeError);
    PruningPolicy bad2;
    bad2.min_weight = 1.0;
    REQUIRE_THROWS_AS(bad2.validate(), RangeError);
}
