#pragma once

#include <atomic>
#include <cmath>
#include <future>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "fisst/association.hpp"
#include "fisst/forest.hpp"
#include "fisst/models.hpp"
#include "fisst/pruning.hpp"

namespace fisst {

// ---- Hypothesis-conditioned prediction ----

/// Survival -> prediction -> birth. Non-survivors are removed, survivors are
/// Kalman-predicted, and one fresh birth belief is appended per hypothesized
/// pixel. The weight picks up the survival and birth priors; the data
/// association prior arrives in the update step.
inline Hypothesis predict_hypothesis(const Hypothesis& h, const BirthHypothesis& b,
                                     const SurvivalHypothesis& s,
                                     const ScenarioModels& models, int scan) {
    const int r = h.n();
    for (std::size_t i = 0; i < s.survivors.size(); ++i) {
        if (s.survivors[i] < 0 || s.survivors[i] >= r)
            throw RangeError("predict_hypothesis: survivor index out of range");
        if (i > 0 && s.survivors[i] <= s.survivors[i - 1])
            throw RangeError("predict_hypothesis: survivor indices must be strictly increasing");
    }
    Hypothesis out;
    out.log_weight = h.log_weight + log_survival_prior(s.count(), r, models.survival) +
                     log_birth_hypothesis_prior(b.births(), models.birth);
    out.tracks.reserve(s.survivors.size() + b.pixels.size());
    for (int idx : s.survivors) {
        out.tracks.push_back(
            Track{h.tracks[idx].label, predict(h.tracks[idx].belief, models.motion)});
    }
    for (int pixel : b.pixels) {
        out.tracks.push_back(Track{TrackLabel::birth(scan, pixel), birth_pdf(pixel, models.birth)});
    }
    out.canonicalize();
    return out;
}

// ---- Measurement update ----

/// Per-hypothesis Bayes update for one data association. Detected tracks are
/// updated by their assigned measurement, null-assigned tracks keep their
/// predicted pdf, and the (unnormalized) weight picks up the association
/// prior, the exact k!/V^k clutter-likelihood factor, and the detected
/// tracks' marginal likelihoods. Association histories are extended for every
/// track, including null assignments.
inline Hypothesis update_hypothesis(const Hypothesis& h_pred, const DataAssociation& a,
                                    const std::vector<Eigen::VectorXd>& Z,
                                    const ScenarioModels& models, int scan) {
    const int n = h_pred.n();
    const int m = static_cast<int>(Z.size());
    if (a.target_count() != n)
        throw DimensionError("update_hypothesis: association arity must match track count");
    std::vector<bool> used(m, false);
    for (int j : a.target_to_meas) {
        if (j == kNullAssoc) continue;
        if (j < 0 || j >= m) throw RangeError("update_hypothesis: measurement index out of range");
        if (used[j]) throw RangeError("update_hypothesis: measurement assigned twice");
        used[j] = true;
    }
    const int k = a.clutter_count(m);

    Hypothesis out;
    out.log_weight = h_pred.log_weight +
                     log_association_prior(n, m, k, models.measurement, models.clutter) +
                     std::lgamma(k + 1.0) -
                     int_pow_log(k, std::log(models.clutter.volume));
    out.tracks.reserve(n);
    for (int i = 0; i < n; ++i) {
        const int j = a.target_to_meas[i];
        if (j == kNullAssoc) {
            out.tracks.push_back(
                Track{h_pred.tracks[i].label.extended(scan, kNullAssoc), h_pred.tracks[i].belief});
        } else {
            UpdateResult res = update(h_pred.tracks[i].belief, Z[j], models.measurement);
            out.log_weight += res.log_likelihood;
            out.tracks.push_back(
                Track{h_pred.tracks[i].label.extended(scan, j), Belief{std::move(res.posterior)}});
        }
    }
    out.canonicalize();
    return out;
}

// ---- Closed-form weight rules ----

/// Reid's posterior hypothesis weight (unnormalized, log domain):
///   (1-p_d)^(n-(m-k)) p_d^(m-k) prod(likelihoods) (lb/p_d)^births lc^k w_parent.
/// All hypothesized births are detected; `detected_track_log_likelihoods`
/// holds only the detected pre-existing tracks' factors. Setting
/// `include_birth_detection_prob` adds the p_d-per-birth factor used by later
/// MHT formulations, i.e. replaces lb/p_d with lb.
inline double homht_child_weight(double parent_log_weight,
                                 std::span<const double> detected_track_log_likelihoods,
                                 int n, int m, int k, int n_births,
                                 const ScenarioModels& models,
                                 bool include_birth_detection_prob = false) {
    if (k < 0 || k > m) throw RangeError("homht_child_weight: need 0 <= k <= m");
    if (n_births < 0 || n_births > n) throw RangeError("homht_child_weight: bad birth count");
    const int detections = m - k;
    if (detections > n) throw DimensionError("homht_child_weight: more detections than targets");
    if (detections - n_births != static_cast<int>(detected_track_log_likelihoods.size()))
        throw DimensionError(
            "homht_child_weight: likelihood count must equal detected pre-existing tracks");
    const double p_d = models.measurement.p_d;
    double lw = parent_log_weight;
    lw += int_pow_log(detections, std::log(p_d));
    lw += int_pow_log(n - detections, std::log1p(-p_d));
    for (double ll : detected_track_log_likelihoods) lw += ll;
    const double birth_rate_log =
        std::log(models.birth.lambda_b) - (include_birth_detection_prob ? 0.0 : std::log(p_d));
    lw += int_pow_log(n_births, birth_rate_log);
    lw += int_pow_log(k, std::log(models.clutter.lambda_c));
    return lw;
}

/// Closed-form FISST grandchild weight under the full-state-measurement
/// simplifications (unnormalized, log domain):
///   (1-p_d)^(n-(m-k)) p_d^(m-k) prod(likelihoods) lb^(n-r) Vbar^((n-r)-s) lc^k w_parent,
/// with n-r hypothesized births of which s are detected. When the birth
/// pixels and the detected birth measurements are supplied, a detected birth
/// measurement outside every hypothesized pixel zeroes the weight.
inline double fisst_closed_form_weight(double parent_log_weight,
                                       std::span<const double> detected_track_log_likelihoods,
                                       int n, int r, int m, int k, int s,
                                       const ScenarioModels& models,
                                       const std::vector<int>& birth_pixels = {},
                                       const std::vector<Eigen::VectorXd>& detected_birth_meas = {}) {
    if (k < 0 || k > m) throw RangeError("fisst_closed_form_weight: need 0 <= k <= m");
    if (r < 0 || r > n) throw RangeError("fisst_closed_form_weight: need 0 <= r <= n");
    const int births = n - r;
    if (s < 0 || s > births) throw RangeError("fisst_closed_form_weight: need 0 <= s <= n-r");
    const int detections = m - k;
    if (detections > n) throw DimensionError("fisst_closed_form_weight: more detections than targets");
    if (detections - s != static_cast<int>(detected_track_log_likelihoods.size()))
        throw DimensionError(
            "fisst_closed_form_weight: likelihood count must equal detected pre-existing tracks");
    if (!detected_birth_meas.empty() || !birth_pixels.empty()) {
        for (const auto& z : detected_birth_meas) {
            bool covered = false;
            for (int pixel : birth_pixels)
                if (detail::pixel_contains_measurement(models.birth, pixel, z, models.measurement)) {
                    covered = true;
                    break;
                }
            if (!covered) return kNegInf;
        }
    }
    const double p_d = models.measurement.p_d;
    double lw = parent_log_weight;
    lw += int_pow_log(detections, std::log(p_d));
    lw += int_pow_log(n - detections, std::log1p(-p_d));
    for (double ll : detected_track_log_likelihoods) lw += ll;
    lw += int_pow_log(births, std::log(models.birth.lambda_b));
    lw += int_pow_log(births - s, std::log(models.birth.pixel_volume()));
    lw += int_pow_log(k, std::log(models.clutter.lambda_c));
    return lw;
}

// ---- The per-scan recursion ----

struct StepOptions {
    PruningPolicy pruning;
    BirthEnumerationPolicy birth_policy;
    std::optional<EllipsoidalGate> gate;   // unset = exact, ungated recursion
    std::size_t max_descendants = 500'000;
    bool parallel = false;

    static StepOptions exact() {
        StepOptions o;
        o.birth_policy = BirthEnumerationPolicy::all_pixels(2);
        return o;
    }
};

struct StepStats {
    std::size_t descendants = 0;   // materialized children before merging
    std::size_t merged = 0;        // after duplicate merge, before pruning
    std::size_t survivors = 0;     // after pruning
    PruneReport prune_report;
};

namespace detail {

/// Cached predicted track with its per-measurement update results.
struct PredictedTrack {
    TrackLabel label;
    Belief belief;
    std::vector<char> gated;              // per measurement
    std::vector<double> log_likelihood;   // valid where gated
    std::vector<GaussianBelief> posterior;
};

inline PredictedTrack make_predicted_track(TrackLabel label, Belief belief,
                                           const std::vector<Eigen::VectorXd>& Z,
                                           const ScenarioModels& models,
                                           const std::optional<EllipsoidalGate>& gate) {
    const int m = static_cast<int>(Z.size());
    PredictedTrack pt{std::move(label), std::move(belief),
                      std::vector<char>(m, 0), std::vector<double>(m, kNegInf),
                      std::vector<GaussianBelief>(m)};
    for (int j = 0; j < m; ++j) {
        if (gate && !gate->pass(pt.belief, Z[j], models.measurement)) continue;
        UpdateResult res = update(pt.belief, Z[j], models.measurement);
        pt.gated[j] = 1;
        pt.log_likelihood[j] = res.log_likelihood;
        pt.posterior[j] = std::move(res.posterior);
    }
    return pt;
}

/// Expand one parent hypothesis into its (survival, birth, association)
/// descendants. Birth-pixel caches are shared across parents.
inline void expand_parent(const Hypothesis& parent, const std::vector<Eigen::VectorXd>& Z,
                          const ScenarioModels& models, const StepOptions& opts,
                          const std::vector<BirthHypothesis>& birth_hyps,
                          const std::vector<PredictedTrack>& birth_cache,
                          const std::vector<int>& pixel_slot, int scan,
                          std::vector<Hypothesis>& out) {
    const int r = parent.n();
    const int m = static_cast<int>(Z.size());
    const double log_volume = std::log(models.clutter.volume);

    std::vector<PredictedTrack> pred;
    pred.reserve(r);
    for (const auto& t : parent.tracks)
        pred.push_back(make_predicted_track(t.label, predict(t.belief, models.motion), Z,
                                            models, opts.gate));

    for (const auto& surv : enumerate_survival(r)) {
        const double lp_surv = log_survival_prior(surv.count(), r, models.survival);
        if (lp_surv == kNegInf) continue;
        for (const auto& bh : birth_hyps) {
            const double lp_birth = log_birth_hypothesis_prior(bh.births(), models.birth);
            if (lp_birth == kNegInf) continue;

            std::vector<const PredictedTrack*> slots;
            slots.reserve(surv.count() + bh.births());
            for (int idx : surv.survivors) slots.push_back(&pred[idx]);
            for (int pixel : bh.pixels) slots.push_back(&birth_cache[pixel_slot[pixel]]);
            const int n = static_cast<int>(slots.size());

            const double lw_pred = parent.log_weight + lp_surv + lp_birth;
            GatePredicate pair_gate = nullptr;
            if (opts.gate)
                pair_gate = [&slots](int t, int j) { return slots[t]->gated[j] != 0; };

            for (const auto& assoc : enumerate_associations(n, m, pair_gate)) {
                const int k = assoc.clutter_count(m);
                double lw = lw_pred +
                            log_association_prior(n, m, k, models.measurement, models.clutter) +
                            std::lgamma(k + 1.0) - int_pow_log(k, log_volume);
                bool dead = (lw == kNegInf);
                for (int i = 0; i < n && !dead; ++i) {
                    const int j = assoc.target_to_meas[i];
                    if (j == kNullAssoc) continue;
                    if (!slots[i]->gated[j] || slots[i]->log_likelihood[j] == kNegInf) {
                        dead = true;
                        break;
                    }
                    lw += slots[i]->log_likelihood[j];
                }
                if (dead || lw == kNegInf) continue;

                Hypothesis child;
                child.log_weight = lw;
                child.tracks.reserve(n);
                for (int i = 0; i < n; ++i) {
                    const int j = assoc.target_to_meas[i];
                    if (j == kNullAssoc)
                        child.tracks.push_back(
                            Track{slots[i]->label.extended(scan, kNullAssoc), slots[i]->belief});
                    else
                        child.tracks.push_back(Track{slots[i]->label.extended(scan, j),
                                                     Belief{slots[i]->posterior[j]}});
                }
                child.canonicalize();
                if (out.size() >= opts.max_descendants)
                    throw ExplosionError("fisst_step: descendant cap exceeded", scan);
                out.push_back(std::move(child));
            }
        }
    }
}

inline HypothesisForest finish_step(std::vector<Hypothesis>&& children, int next_scan,
                                    const StepOptions& opts, StepStats* stats) {
    if (children.empty())
        throw NumericalError("step: no descendant hypothesis has positive weight");

    // Exact-zero drop: anything 700 nats below the best is gone anyway.
    double max_lw = kNegInf;
    for (const auto& c : children) max_lw = std::max(max_lw, c.log_weight);
    std::vector<Hypothesis> live;
    live.reserve(children.size());
    for (auto& c : children)
        if (c.log_weight >= max_lw - 700.0) live.push_back(std::move(c));

    HypothesisForest next;
    next.scan_index = next_scan;
    next.hypotheses = std::move(live);
    if (stats) stats->descendants = next.hypotheses.size();
    next.normalize();
    merge_duplicate_hypotheses(next);
    if (stats) stats->merged = next.hypotheses.size();

    PruneReport rep;
    next = prune(next, opts.pruning, &rep);
    if (stats) {
        stats->survivors = next.hypotheses.size();
        stats->prune_report = rep;
    }
    return next;
}

} // namespace detail

/// One full FISST scan: every (parent, survival, birth, association)
/// combination is expanded via predict_hypothesis/update_hypothesis
/// semantics, then the descendants are normalized, duplicate label-multisets
/// merged, and the pruning policy applied. Parents expand independently, so
/// the expansion may run on several threads; the reduction order is fixed, so
/// the result is bit-identical to sequential execution.
inline HypothesisForest fisst_step(const HypothesisForest& forest,
                                   const std::vector<Eigen::VectorXd>& Z,
                                   const ScenarioModels& models, const StepOptions& opts,
                                   StepStats* stats = nullptr) {
    const int scan = forest.scan_index;

    const auto birth_hyps =
        enumerate_birth_hypotheses(models.birth, Z, opts.birth_policy, &models.measurement);
    std::vector<int> pixel_slot(models.birth.pixel_count(), -1);
    std::vector<detail::PredictedTrack> birth_cache;
    for (const auto& bh : birth_hyps) {
        for (int pixel : bh.pixels) {
            if (pixel_slot[pixel] >= 0) continue;
            pixel_slot[pixel] = static_cast<int>(birth_cache.size());
            birth_cache.push_back(detail::make_predicted_track(
                TrackLabel::birth(scan, pixel), birth_pdf(pixel, models.birth), Z, models,
                opts.gate));
        }
    }

    std::vector<Hypothesis> children;
    const std::size_t n_parents = forest.hypotheses.size();
    if (opts.parallel && n_parents > 1) {
        std::vector<std::vector<Hypothesis>> slots(n_parents);
        std::vector<std::future<void>> futures;
        const unsigned n_workers =
            std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                               static_cast<unsigned>(n_parents));
        std::atomic<std::size_t> cursor{0};
        for (unsigned w = 0; w < n_workers; ++w) {
            futures.push_back(std::async(std::launch::async, [&]() {
                for (;;) {
                    const std::size_t p = cursor.fetch_add(1);
                    if (p >= n_parents) return;
                    detail::expand_parent(forest.hypotheses[p], Z, models, opts, birth_hyps,
                                          birth_cache, pixel_slot, scan, slots[p]);
                }
            }));
        }
        for (auto& f : futures) f.get();
        std::size_t total = 0;
        for (const auto& s : slots) total += s.size();
        if (total > opts.max_descendants)
            throw ExplosionError("fisst_step: descendant cap exceeded", scan);
        children.reserve(total);
        for (auto& s : slots)
            for (auto& h : s) children.push_back(std::move(h));
    } else {
        for (const auto& parent : forest.hypotheses)
            detail::expand_parent(parent, Z, models, opts, birth_hyps, birth_cache, pixel_slot,
                                  scan, children);
    }

    return detail::finish_step(std::move(children), scan + 1, opts, stats);
}

/// One HOMHT scan (Reid's recursion): no birth hypotheses in prediction;
/// instead, measurements left unassigned by the data association may seed new
/// tracks, initialized from the containing pixel's birth pdf updated with the
/// seeding measurement. Every hypothesized birth is detected by construction.
inline HypothesisForest homht_step(const HypothesisForest& forest,
                                   const std::vector<Eigen::VectorXd>& Z,
                                   const ScenarioModels& models, const StepOptions& opts,
                                   StepStats* stats = nullptr) {
    const int scan = forest.scan_index;
    const int m = static_cast<int>(Z.size());
    const bool seeding = models.birth.lambda_b > 0.0;
    if (seeding && !detail::is_coordinate_selection(models.measurement.H))
        throw ConfigError("homht: birth seeding needs a coordinate-selecting H");
    if (seeding && models.measurement.meas_dim() != models.motion.state_dim())
        throw ConfigError("homht: birth seeding needs full-state measurements");

    // Per-measurement seed candidates: the containing pixel's birth pdf
    // updated with the measurement. The seed's spatial likelihood does not
    // enter the weight; Reid's rule charges the per-volume rate lb/p_d
    // instead.
    struct Seed {
        int pixel = -1;
        GaussianBelief posterior;
    };
    std::vector<Seed> seeds(m);
    if (seeding) {
        for (int j = 0; j < m; ++j) {
            Eigen::VectorXd x(models.motion.state_dim());
            for (int i = 0; i < models.measurement.meas_dim(); ++i) {
                int col = 0;
                while (models.measurement.H(i, col) == 0.0) ++col;
                x(col) = Z[j](i);
            }
            const int pixel = models.birth.pixel_index_of(x);
            if (pixel < 0) continue;
            UpdateResult res = update(birth_pdf(pixel, models.birth), Z[j], models.measurement);
            seeds[j] = Seed{pixel, std::move(res.posterior)};
        }
    }

    std::vector<Hypothesis> children;
    for (const auto& parent : forest.hypotheses) {
        const int r = parent.n();
        std::vector<detail::PredictedTrack> pred;
        pred.reserve(r);
        for (const auto& t : parent.tracks)
            pred.push_back(detail::make_predicted_track(t.label, predict(t.belief, models.motion),
                                                        Z, models, opts.gate));

        for (const auto& surv : enumerate_survival(r)) {
            const double lp_surv = log_survival_prior(surv.count(), r, models.survival);
            if (lp_surv == kNegInf) continue;
            std::vector<const detail::PredictedTrack*> slots;
            for (int idx : surv.survivors) slots.push_back(&pred[idx]);
            const int n_exist = static_cast<int>(slots.size());

            GatePredicate pair_gate = nullptr;
            if (opts.gate)
                pair_gate = [&slots](int t, int j) { return slots[t]->gated[j] != 0; };

            for (const auto& assoc : enumerate_associations(n_exist, m, pair_gate)) {
                std::vector<double> det_lls;
                bool dead = false;
                for (int i = 0; i < n_exist && !dead; ++i) {
                    const int j = assoc.target_to_meas[i];
                    if (j == kNullAssoc) continue;
                    if (!slots[i]->gated[j] || slots[i]->log_likelihood[j] == kNegInf) dead = true;
                    else det_lls.push_back(slots[i]->log_likelihood[j]);
                }
                if (dead) continue;

                std::vector<int> free_meas;
                for (int j = 0; j < m; ++j) {
                    bool taken = false;
                    for (int i = 0; i < n_exist; ++i)
                        if (assoc.target_to_meas[i] == j) taken = true;
                    if (!taken && seeding && seeds[j].pixel >= 0) free_meas.push_back(j);
                }

                const auto seed_sets = detail::subsets_by_size(
                    free_meas, seeding ? static_cast<int>(free_meas.size()) : 0,
                    opts.max_descendants, "homht_step: seed cap exceeded");
                for (const auto& B : seed_sets) {
                    // distinct pixels only: two seeds in one pixel would be one
                    // birth pdf explaining two measurements
                    bool pixel_clash = false;
                    for (std::size_t a = 0; a < B.size() && !pixel_clash; ++a)
                        for (std::size_t b = a + 1; b < B.size(); ++b)
                            if (seeds[B[a]].pixel == seeds[B[b]].pixel) pixel_clash = true;
                    if (pixel_clash) continue;

                    const int n_births = static_cast<int>(B.size());
                    const int n = n_exist + n_births;
                    const int k = m - static_cast<int>(det_lls.size()) - n_births;
                    const double lw = homht_child_weight(parent.log_weight + lp_surv, det_lls, n,
                                                         m, k, n_births, models);
                    if (lw == kNegInf) continue;

                    Hypothesis child;
                    child.log_weight = lw;
                    child.tracks.reserve(n);
                    for (int i = 0; i < n_exist; ++i) {
                        const int j = assoc.target_to_meas[i];
                        if (j == kNullAssoc)
                            child.tracks.push_back(Track{slots[i]->label.extended(scan, kNullAssoc),
                                                         slots[i]->belief});
                        else
                            child.tracks.push_back(Track{slots[i]->label.extended(scan, j),
                                                         Belief{slots[i]->posterior[j]}});
                    }
                    for (int j : B)
                        child.tracks.push_back(
                            Track{TrackLabel::birth(scan, seeds[j].pixel).extended(scan, j),
                                  Belief{seeds[j].posterior}});
                    child.canonicalize();
                    if (children.size() >= opts.max_descendants)
                        throw ExplosionError("homht_step: descendant cap exceeded", scan);
                    children.push_back(std::move(child));
                }
            }
        }
    }

    return detail::finish_step(std::move(children), scan + 1, opts, stats);
}

} // namespace fisst
