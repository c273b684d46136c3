#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "fisst/forest.hpp"
#include "fisst/models.hpp"

namespace fisst {

struct PruningPolicy {
    std::size_t max_hypotheses = std::numeric_limits<std::size_t>::max();
    double min_weight = 0.0;
    bool drop_undetected_births = false;

    void validate() const {
        if (max_hypotheses < 1) throw RangeError("pruning: max_hypotheses must be >= 1");
        if (min_weight < 0.0 || min_weight >= 1.0)
            throw RangeError("pruning: min_weight must be in [0,1)");
    }

    static PruningPolicy none() { return PruningPolicy{}; }
};

struct PruneReport {
    double dropped_mass = 0.0;
    std::size_t dropped_undetected_births = 0;
    std::size_t dropped_below_threshold = 0;
    std::size_t dropped_over_cap = 0;
};

/// A hypothesis asserting a birth whose creating scan assigned it the null
/// measurement (the v-side of the undetected-birth pairing).
inline bool hypothesis_has_undetected_birth(const Hypothesis& h) {
    for (const auto& t : h.tracks)
        if (t.label.undetected_at_creation()) return true;
    return false;
}

/// Deterministic pruning: undetected-birth drop first (when enabled), then
/// the weight threshold, then the top-K cap. Survivors are ordered by weight
/// descending with label-lexicographic tie-break and renormalized. The last
/// hypothesis is never removed.
inline HypothesisForest prune(const HypothesisForest& forest, const PruningPolicy& policy,
                              PruneReport* report = nullptr) {
    policy.validate();
    PruneReport rep;

    std::vector<std::size_t> order(forest.hypotheses.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ha = forest.hypotheses[a];
        const auto& hb = forest.hypotheses[b];
        if (ha.log_weight != hb.log_weight) return ha.log_weight > hb.log_weight;
        return ha.label_key() < hb.label_key();
    });

    std::vector<std::size_t> kept;
    for (std::size_t idx : order) {
        const Hypothesis& h = forest.hypotheses[idx];
        if (policy.drop_undetected_births && hypothesis_has_undetected_birth(h)) {
            ++rep.dropped_undetected_births;
            rep.dropped_mass += std::exp(h.log_weight);
            continue;
        }
        if (std::exp(h.log_weight) < policy.min_weight) {
            ++rep.dropped_below_threshold;
            rep.dropped_mass += std::exp(h.log_weight);
            continue;
        }
        if (kept.size() >= policy.max_hypotheses) {
            ++rep.dropped_over_cap;
            rep.dropped_mass += std::exp(h.log_weight);
            continue;
        }
        kept.push_back(idx);
    }
    if (kept.empty() && !forest.hypotheses.empty()) {
        // never remove the last hypothesis
        kept.push_back(order.front());
        rep.dropped_mass -= std::exp(forest.hypotheses[order.front()].log_weight);
        if (policy.drop_undetected_births &&
            hypothesis_has_undetected_birth(forest.hypotheses[order.front()]))
            --rep.dropped_undetected_births;
        else if (std::exp(forest.hypotheses[order.front()].log_weight) < policy.min_weight)
            --rep.dropped_below_threshold;
    }

    HypothesisForest out;
    out.scan_index = forest.scan_index;
    out.hypotheses.reserve(kept.size());
    for (std::size_t idx : kept) out.hypotheses.push_back(forest.hypotheses[idx]);
    out.normalize();
    if (report) *report = rep;
    return out;
}

/// Total weight the policy would discard from a normalized forest.
inline double pruning_error_bound(const HypothesisForest& forest_pre_prune,
                                  const PruningPolicy& policy) {
    PruneReport rep;
    prune(forest_pre_prune, policy, &rep);
    return rep.dropped_mass;
}

/// The pairwise weight ratio of an undetected-birth hypothesis to its
/// all-detected partner: (1 - p_d) * alpha.
inline double undetected_birth_ratio(const ScenarioModels& models) {
    return (1.0 - models.measurement.p_d) * models.birth.alpha;
}

} // namespace fisst
