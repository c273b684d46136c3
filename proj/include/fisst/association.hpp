#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fisst/belief.hpp"
#include "fisst/common.hpp"
#include "fisst/models.hpp"

namespace fisst {

/// An injective partial map from targets to measurement indices; unassigned
/// targets carry kNullAssoc, unassigned measurements are implied clutter.
struct DataAssociation {
    std::vector<int> target_to_meas;

    int target_count() const { return static_cast<int>(target_to_meas.size()); }

    int detections() const {
        int d = 0;
        for (int a : target_to_meas)
            if (a != kNullAssoc) ++d;
        return d;
    }

    int clutter_count(int m) const { return m - detections(); }
};

/// Pair gate: may target i explain measurement j? Null means no gating.
using GatePredicate = std::function<bool(int target, int meas)>;

/// All injective partial maps from n targets to m measurements, in
/// lexicographic order of the assignment vector (null sorts first).
inline std::vector<DataAssociation> enumerate_associations(
    int n, int m, const GatePredicate& gate = nullptr,
    std::size_t cap = 5'000'000) {
    if (n < 0 || m < 0) throw RangeError("enumerate_associations: negative counts");
    std::vector<DataAssociation> out;
    std::vector<int> assign(n, kNullAssoc);
    std::vector<bool> used(m, false);
    auto rec = [&](auto&& self, int t) -> void {
        if (t == n) {
            if (out.size() >= cap)
                throw ExplosionError("enumerate_associations: cap exceeded");
            out.push_back(DataAssociation{assign});
            return;
        }
        assign[t] = kNullAssoc;
        self(self, t + 1);
        for (int j = 0; j < m; ++j) {
            if (used[j]) continue;
            if (gate && !gate(t, j)) continue;
            used[j] = true;
            assign[t] = j;
            self(self, t + 1);
            assign[t] = kNullAssoc;
            used[j] = false;
        }
    };
    rec(rec, 0);
    return out;
}

/// Closed-form ungated association count: sum_d C(n,d) m!/(m-d)!.
inline std::uint64_t count_associations(int n, int m,
                                        std::uint64_t overflow_bound = UINT64_C(1) << 62) {
    if (n < 0 || m < 0) throw RangeError("count_associations: negative counts");
    std::uint64_t total = 0;
    const int dmax = std::min(n, m);
    for (int d = 0; d <= dmax; ++d) {
        // C(n,d) * P(m,d), built incrementally to keep intermediates small
        unsigned __int128 term = 1;
        for (int i = 0; i < d; ++i) {
            term *= static_cast<unsigned __int128>(n - i) * static_cast<unsigned __int128>(m - i);
            term /= (i + 1);
        }
        const unsigned __int128 next = static_cast<unsigned __int128>(total) + term;
        if (next > overflow_bound)
            throw ExplosionError("count_associations: count exceeds bound");
        total = static_cast<std::uint64_t>(next);
    }
    return total;
}

/// A specific set of pixels asserted to have spawned births this scan.
/// Canonically sorted; birth priors are permutation-symmetric.
struct BirthHypothesis {
    std::vector<int> pixels;

    int births() const { return static_cast<int>(pixels.size()); }
};

struct BirthEnumerationPolicy {
    enum class Kind { all_pixels, measurement_gated };

    Kind kind = Kind::measurement_gated;
    int max_births = 2;
    std::size_t cap = 100'000;

    static BirthEnumerationPolicy all_pixels(int max_births, std::size_t cap = 100'000) {
        return BirthEnumerationPolicy{Kind::all_pixels, max_births, cap};
    }
    static BirthEnumerationPolicy measurement_gated(int max_births, std::size_t cap = 100'000) {
        return BirthEnumerationPolicy{Kind::measurement_gated, max_births, cap};
    }
};

namespace detail {

/// Does measurement z fall inside pixel `pixel` of the birth grid?
/// Exact box containment when H selects coordinates; otherwise a Mahalanobis
/// gate against the pixel's moment-matched Gaussian.
inline bool pixel_contains_measurement(const BirthModel& birth, int pixel,
                                       const Eigen::VectorXd& z,
                                       const MeasurementModel& meas) {
    if (is_coordinate_selection(meas.H)) {
        const Eigen::VectorXd lo = birth.pixel_lo(pixel);
        const Eigen::VectorXd hi = birth.pixel_hi(pixel);
        for (int i = 0; i < meas.meas_dim(); ++i) {
            int col = 0;
            while (meas.H(i, col) == 0.0) ++col;
            if (z(i) < lo(col) || z(i) > hi(col)) return false;
        }
        return true;
    }
    const GaussianBelief g =
        std::get<GaussianBelief>(birth_pdf(pixel, birth, BirthBeliefMode::gaussian_moment_match));
    Eigen::MatrixXd S = meas.H * g.cov * meas.H.transpose() + meas.R;
    S = 0.5 * (S + S.transpose()).eval();
    const Eigen::VectorXd r = z - meas.H * g.mean;
    const double maha2 = r.dot(innovation_llt(S).solve(r));
    boost::math::chi_squared chi2(static_cast<double>(meas.meas_dim()));
    return maha2 <= boost::math::quantile(chi2, 0.999);
}

/// Subsets of `candidates` of size <= max_size, ordered by size then lex.
inline std::vector<std::vector<int>> subsets_by_size(const std::vector<int>& candidates,
                                                     int max_size, std::size_t cap,
                                                     const char* what) {
    std::vector<std::vector<int>> out;
    out.push_back({});
    const int limit = std::min<int>(max_size, static_cast<int>(candidates.size()));
    for (int size = 1; size <= limit; ++size) {
        std::vector<int> pick;
        auto rec = [&](auto&& self, std::size_t start) -> void {
            if (static_cast<int>(pick.size()) == size) {
                if (out.size() >= cap) throw ExplosionError(what);
                out.push_back(pick);
                return;
            }
            for (std::size_t i = start; i < candidates.size(); ++i) {
                pick.push_back(candidates[i]);
                self(self, i + 1);
                pick.pop_back();
            }
        };
        rec(rec, 0);
    }
    return out;
}

} // namespace detail

/// Distinct pixel sets of size <= policy.max_births, ordered by size then
/// lexicographically. measurement_gated keeps only pixels containing at least
/// one measurement (plus the empty hypothesis).
inline std::vector<BirthHypothesis> enumerate_birth_hypotheses(
    const BirthModel& birth, const std::vector<Eigen::VectorXd>& measurements,
    const BirthEnumerationPolicy& policy,
    const MeasurementModel* meas_model = nullptr) {
    std::vector<int> candidates;
    if (policy.kind == BirthEnumerationPolicy::Kind::all_pixels) {
        candidates.resize(birth.pixel_count());
        for (int i = 0; i < birth.pixel_count(); ++i) candidates[i] = i;
    } else {
        if (!meas_model)
            throw RangeError("enumerate_birth_hypotheses: gated policy needs a measurement model");
        std::vector<bool> hit(birth.pixel_count(), false);
        for (const auto& z : measurements)
            for (int p = 0; p < birth.pixel_count(); ++p)
                if (!hit[p] && detail::pixel_contains_measurement(birth, p, z, *meas_model))
                    hit[p] = true;
        for (int p = 0; p < birth.pixel_count(); ++p)
            if (hit[p]) candidates.push_back(p);
    }
    auto sets = detail::subsets_by_size(candidates, policy.max_births, policy.cap,
                                        "enumerate_birth_hypotheses: cap exceeded");
    std::vector<BirthHypothesis> out;
    out.reserve(sets.size());
    for (auto& s : sets) out.push_back(BirthHypothesis{std::move(s)});
    return out;
}

/// The subset of the current track slots that survive.
struct SurvivalHypothesis {
    std::vector<int> survivors; // sorted track indices

    int count() const { return static_cast<int>(survivors.size()); }
};

/// All 2^r subsets in ascending bitmask order (bit i = slot i survives).
inline std::vector<SurvivalHypothesis> enumerate_survival(int r, int cap_bits = 24) {
    if (r < 0) throw RangeError("enumerate_survival: negative track count");
    if (r > cap_bits) throw ExplosionError("enumerate_survival: cap exceeded");
    std::vector<SurvivalHypothesis> out;
    out.reserve(std::size_t{1} << r);
    for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << r); ++mask) {
        SurvivalHypothesis s;
        for (int i = 0; i < r; ++i)
            if (mask & (std::uint32_t{1} << i)) s.survivors.push_back(i);
        out.push_back(std::move(s));
    }
    return out;
}

// ---- Gating ----

inline double chi2_quantile(int dof, double p) {
    if (dof < 1) throw RangeError("chi2_quantile: dof must be >= 1");
    if (p <= 0.0 || p >= 1.0) throw RangeError("chi2_quantile: p must be in (0,1)");
    boost::math::chi_squared dist(static_cast<double>(dof));
    return boost::math::quantile(dist, p);
}

/// Ellipsoidal (Mahalanobis) gate on the measurement innovation. This is an
/// approximation knob: an unset gate reproduces the exact ungated recursion.
struct EllipsoidalGate {
    double maha2_threshold;

    static EllipsoidalGate from_probability(double p, int meas_dim) {
        return EllipsoidalGate{chi2_quantile(meas_dim, p)};
    }

    bool pass(const GaussianBelief& b, const Eigen::VectorXd& z,
              const MeasurementModel& meas) const {
        Eigen::MatrixXd S = meas.H * b.cov * meas.H.transpose() + meas.R;
        S = 0.5 * (S + S.transpose()).eval();
        const Eigen::VectorXd r = z - meas.H * b.mean;
        return r.dot(detail::innovation_llt(S).solve(r)) <= maha2_threshold;
    }

    bool pass(const Belief& b, const Eigen::VectorXd& z, const MeasurementModel& meas) const {
        if (const auto* g = std::get_if<GaussianBelief>(&b)) return pass(*g, z, meas);
        // Boxes gate through their moment-matched Gaussian.
        return pass(std::get<BoxBelief>(b).moment_matched(), z, meas);
    }
};

} // namespace fisst
