#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "fisst/belief.hpp"
#include "fisst/common.hpp"

namespace fisst {

struct Track {
    TrackLabel label;
    Belief belief;
};

using LabelKey = std::tuple<int, int, int, std::uint64_t, std::uint64_t>;

/// One consistent assignment of history: a set of tracks plus a log-weight.
/// Tracks are kept sorted by label so that storage order never carries
/// information.
struct Hypothesis {
    std::vector<Track> tracks;
    double log_weight = 0.0;

    int n() const { return static_cast<int>(tracks.size()); }

    void canonicalize() {
        std::sort(tracks.begin(), tracks.end(),
                  [](const Track& a, const Track& b) { return a.label < b.label; });
    }

    std::vector<LabelKey> label_key() const {
        std::vector<LabelKey> k;
        k.reserve(tracks.size());
        for (const auto& t : tracks) k.push_back(t.label.key());
        return k;
    }

    /// Canonical textual key (labels joined), used in traces and comparisons.
    std::string key_string() const {
        std::string s;
        for (std::size_t i = 0; i < tracks.size(); ++i) {
            if (i) s += ",";
            s += tracks[i].label.to_string();
        }
        return s.empty() ? "<empty>" : s;
    }
};

/// The full multi-target pdf: a weighted collection of hypotheses.
struct HypothesisForest {
    std::vector<Hypothesis> hypotheses;
    int scan_index = 0;

    double total_weight() const {
        double s = 0.0;
        for (const auto& h : hypotheses) s += std::exp(h.log_weight);
        return s;
    }

    void normalize() {
        std::vector<double> lws;
        lws.reserve(hypotheses.size());
        for (const auto& h : hypotheses) lws.push_back(h.log_weight);
        const double lse = log_sum_exp(lws);
        if (!std::isfinite(lse))
            throw NumericalError("forest: cannot normalize zero total weight");
        for (auto& h : hypotheses) h.log_weight -= lse;
    }
};

/// Forest holding the n initial targets in a single unit-weight hypothesis.
inline HypothesisForest initial_forest(const std::vector<GaussianBelief>& targets) {
    Hypothesis h;
    for (std::size_t k = 0; k < targets.size(); ++k)
        h.tracks.push_back(Track{TrackLabel::initial_target(static_cast<int>(k)), targets[k]});
    h.log_weight = 0.0;
    h.canonicalize();
    HypothesisForest f;
    f.hypotheses.push_back(std::move(h));
    f.scan_index = 0;
    return f;
}

/// rho(n): probability of each cardinality, summed over hypothesis weights.
inline std::map<int, double> cardinality_distribution(const HypothesisForest& forest) {
    std::map<int, double> rho;
    for (const auto& h : forest.hypotheses) rho[h.n()] += std::exp(h.log_weight);
    return rho;
}

/// Sum the weights of hypotheses with identical track-label multisets,
/// keeping the first occurrence's position (stable, deterministic).
inline void merge_duplicate_hypotheses(HypothesisForest& forest) {
    std::map<std::vector<LabelKey>, std::size_t> seen;
    std::vector<Hypothesis> merged;
    merged.reserve(forest.hypotheses.size());
    for (auto& h : forest.hypotheses) {
        auto key = h.label_key();
        auto [it, inserted] = seen.emplace(std::move(key), merged.size());
        if (inserted) {
            merged.push_back(std::move(h));
        } else {
            Hypothesis& dst = merged[it->second];
            dst.log_weight = log_add_exp(dst.log_weight, h.log_weight);
        }
    }
    forest.hypotheses = std::move(merged);
}

/// Canonical key -> weight map for cross-run comparisons.
inline std::map<std::string, double> forest_weight_map(const HypothesisForest& forest) {
    std::map<std::string, double> m;
    for (const auto& h : forest.hypotheses)
        m[h.key_string()] += std::exp(h.log_weight);
    return m;
}

} // namespace fisst
