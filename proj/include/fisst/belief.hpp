#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <variant>

#include "fisst/common.hpp"
#include "fisst/models.hpp"

namespace fisst {

/// Sentinel measurement index for the null association (a missed target).
inline constexpr int kNullAssoc = -1;

/// Gaussian single-target pdf. Covariance is symmetrized on construction and
/// must be Cholesky-factorizable within 1e-10 after symmetrization.
struct GaussianBelief {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    GaussianBelief() = default;

    GaussianBelief(Eigen::VectorXd m, Eigen::MatrixXd c)
        : mean(std::move(m)), cov(std::move(c)) {
        if (cov.rows() != cov.cols() || cov.rows() != mean.size())
            throw DimensionError("belief: covariance shape must match mean");
        cov = 0.5 * (cov + cov.transpose()).eval();
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) {
            const double jitter = 1e-10 * std::max(1.0, cov.diagonal().maxCoeff());
            Eigen::LLT<Eigen::MatrixXd> retry(
                cov + jitter * Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
            if (retry.info() != Eigen::Success)
                throw NumericalError("belief: covariance is not positive definite");
        }
    }

    int dim() const { return static_cast<int>(mean.size()); }
};

/// Uniform density over an axis-aligned box (the exact birth-pixel pdf).
struct BoxBelief {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    int dim() const { return static_cast<int>(lo.size()); }

    double volume() const {
        double v = 1.0;
        for (int a = 0; a < dim(); ++a) v *= hi(a) - lo(a);
        return v;
    }

    Eigen::VectorXd center() const { return 0.5 * (lo + hi); }

    /// Gaussian with the box's mean and covariance (width^2/12 per axis).
    GaussianBelief moment_matched() const {
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dim(), dim());
        for (int a = 0; a < dim(); ++a) {
            const double w = hi(a) - lo(a);
            c(a, a) = w * w / 12.0;
        }
        return GaussianBelief(center(), c);
    }
};

using Belief = std::variant<GaussianBelief, BoxBelief>;

inline int belief_dim(const Belief& b) {
    return std::visit([](const auto& v) { return v.dim(); }, b);
}

inline Eigen::VectorXd belief_mean(const Belief& b) {
    if (const auto* g = std::get_if<GaussianBelief>(&b)) return g->mean;
    return std::get<BoxBelief>(b).center();
}

inline Eigen::MatrixXd belief_cov(const Belief& b) {
    if (const auto* g = std::get_if<GaussianBelief>(&b)) return g->cov;
    return std::get<BoxBelief>(b).moment_matched().cov;
}

// ---- Kalman prediction / update ----

inline GaussianBelief predict(const GaussianBelief& b, const MotionModel& motion) {
    if (motion.state_dim() != b.dim())
        throw DimensionError("predict: state dimension mismatch");
    return GaussianBelief(motion.F * b.mean,
                          motion.F * b.cov * motion.F.transpose() + motion.process_noise());
}

/// A box is moment-matched to a Gaussian before prediction.
inline Belief predict(const Belief& b, const MotionModel& motion) {
    if (const auto* g = std::get_if<GaussianBelief>(&b)) return predict(*g, motion);
    return predict(std::get<BoxBelief>(b).moment_matched(), motion);
}

struct UpdateResult {
    GaussianBelief posterior;
    double log_likelihood; // log N(z; H mean, H cov H' + R)
};

namespace detail {

/// Factorized innovation covariance; throws on a singular S.
inline Eigen::LLT<Eigen::MatrixXd> innovation_llt(const Eigen::MatrixXd& S) {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw NumericalError("update: singular innovation covariance");
    const Eigen::MatrixXd& L = llt.matrixL();
    for (int i = 0; i < L.rows(); ++i)
        if (!(L(i, i) > 0.0) || !std::isfinite(L(i, i)))
            throw NumericalError("update: singular innovation covariance");
    return llt;
}

inline double log_gaussian_density(const Eigen::LLT<Eigen::MatrixXd>& llt,
                                   const Eigen::VectorXd& residual) {
    const Eigen::MatrixXd& L = llt.matrixL();
    double log_det = 0.0;
    for (int i = 0; i < L.rows(); ++i) log_det += 2.0 * std::log(L(i, i));
    const double maha2 = residual.dot(llt.solve(residual));
    const double d = static_cast<double>(residual.size());
    return -0.5 * (d * std::log(2.0 * M_PI) + log_det + maha2);
}

/// True iff every row of H selects exactly one state coordinate with
/// coefficient 1, no coordinate twice.
inline bool is_coordinate_selection(const Eigen::MatrixXd& H) {
    std::vector<bool> used(H.cols(), false);
    for (int i = 0; i < H.rows(); ++i) {
        int hits = 0, col = -1;
        for (int j = 0; j < H.cols(); ++j) {
            if (H(i, j) != 0.0) {
                ++hits;
                col = j;
            }
        }
        if (hits != 1 || H(i, col) != 1.0 || used[col]) return false;
        used[col] = true;
    }
    return true;
}

inline bool is_diagonal(const Eigen::MatrixXd& R) {
    for (int i = 0; i < R.rows(); ++i)
        for (int j = 0; j < R.cols(); ++j)
            if (i != j && R(i, j) != 0.0) return false;
    return true;
}

} // namespace detail

/// Kalman measurement update with Joseph-form covariance; also returns the
/// log marginal likelihood of z under the prior.
inline UpdateResult update(const GaussianBelief& b, const Eigen::VectorXd& z,
                           const MeasurementModel& meas) {
    if (meas.state_dim() != b.dim()) throw DimensionError("update: state dimension mismatch");
    if (z.size() != meas.meas_dim()) throw DimensionError("update: measurement dimension mismatch");
    const Eigen::MatrixXd& H = meas.H;
    Eigen::MatrixXd S = H * b.cov * H.transpose() + meas.R;
    S = 0.5 * (S + S.transpose()).eval();
    const auto llt = detail::innovation_llt(S);
    const Eigen::VectorXd residual = z - H * b.mean;
    const double ll = detail::log_gaussian_density(llt, residual);

    const Eigen::MatrixXd K = llt.solve(H * b.cov).transpose(); // P H' S^-1
    const Eigen::VectorXd mean_post = b.mean + K * residual;
    const Eigen::MatrixXd IKH =
        Eigen::MatrixXd::Identity(b.dim(), b.dim()) - K * H;
    Eigen::MatrixXd cov_post = IKH * b.cov * IKH.transpose() + K * meas.R * K.transpose();
    return UpdateResult{GaussianBelief(mean_post, cov_post), ll};
}

/// Marginal measurement likelihood without forming the posterior.
inline double log_marginal_likelihood(const GaussianBelief& b, const Eigen::VectorXd& z,
                                      const MeasurementModel& meas) {
    if (meas.state_dim() != b.dim())
        throw DimensionError("marginal_likelihood: state dimension mismatch");
    if (z.size() != meas.meas_dim())
        throw DimensionError("marginal_likelihood: measurement dimension mismatch");
    const Eigen::MatrixXd& H = meas.H;
    Eigen::MatrixXd S = H * b.cov * H.transpose() + meas.R;
    S = 0.5 * (S + S.transpose()).eval();
    return detail::log_gaussian_density(detail::innovation_llt(S), z - H * b.mean);
}

/// Exact marginal likelihood of z under a uniform box prior:
/// a product of per-axis Phi differences over the measured coordinates.
/// Requires a coordinate-selecting H and diagonal R.
inline double log_marginal_likelihood(const BoxBelief& b, const Eigen::VectorXd& z,
                                      const MeasurementModel& meas) {
    if (meas.state_dim() != b.dim())
        throw DimensionError("marginal_likelihood: state dimension mismatch");
    if (!detail::is_coordinate_selection(meas.H) || !detail::is_diagonal(meas.R))
        throw NumericalError(
            "box belief: exact likelihood needs a coordinate-selecting H and diagonal R");
    double lp = 0.0;
    for (int i = 0; i < meas.meas_dim(); ++i) {
        int col = 0;
        while (meas.H(i, col) == 0.0) ++col;
        const double sigma = std::sqrt(meas.R(i, i));
        const double mass = normal_cdf((b.hi(col) - z(i)) / sigma) -
                            normal_cdf((b.lo(col) - z(i)) / sigma);
        if (mass <= 0.0) return kNegInf;
        lp += std::log(mass) - std::log(b.hi(col) - b.lo(col));
    }
    return lp;
}

/// Updating a box collapses it to a Gaussian: measured coordinates take the
/// truncated-normal limit N(z_i, R_ii); unmeasured ones keep box moments.
inline UpdateResult update(const BoxBelief& b, const Eigen::VectorXd& z,
                           const MeasurementModel& meas) {
    const double ll = log_marginal_likelihood(b, z, meas);
    Eigen::VectorXd mean = b.center();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(b.dim(), b.dim());
    for (int a = 0; a < b.dim(); ++a) {
        const double w = b.hi(a) - b.lo(a);
        cov(a, a) = w * w / 12.0;
    }
    for (int i = 0; i < meas.meas_dim(); ++i) {
        int col = 0;
        while (meas.H(i, col) == 0.0) ++col;
        mean(col) = z(i);
        cov(col, col) = meas.R(i, i);
    }
    return UpdateResult{GaussianBelief(mean, cov), ll};
}

inline UpdateResult update(const Belief& b, const Eigen::VectorXd& z,
                           const MeasurementModel& meas) {
    return std::visit([&](const auto& v) { return update(v, z, meas); }, b);
}

inline double log_marginal_likelihood(const Belief& b, const Eigen::VectorXd& z,
                                      const MeasurementModel& meas) {
    return std::visit([&](const auto& v) { return log_marginal_likelihood(v, z, meas); }, b);
}

/// Single-target pdf for one birth pixel, in the requested representation.
inline Belief birth_pdf(int pixel_index, const BirthModel& birth, BirthBeliefMode mode) {
    if (pixel_index < 0 || pixel_index >= birth.pixel_count())
        throw RangeError("birth_pdf: pixel index out of range");
    BoxBelief box{birth.pixel_lo(pixel_index), birth.pixel_hi(pixel_index)};
    if (mode == BirthBeliefMode::uniform) return box;
    return box.moment_matched();
}

inline Belief birth_pdf(int pixel_index, const BirthModel& birth) {
    return birth_pdf(pixel_index, birth, birth.mode);
}

// ---- Track identity ----

/// Identity of a track: where the target came from plus a digest of the full
/// association history (which measurement, or the null sentinel, was assigned
/// at each scan). Labels never enter any weight; they exist so hypotheses can
/// be merged, ordered, and reported deterministically.
struct TrackLabel {
    enum class Origin : int { initial = 0, birth = 1 };

    Origin origin = Origin::initial;
    int origin_a = 0; // initial target index, or birth scan
    int origin_b = 0; // unused, or birth pixel
    std::uint64_t digest0 = 0;
    std::uint64_t digest1 = 0;
    int first_measurement = kUnseen;

    static constexpr int kUnseen = -2;

    static TrackLabel initial_target(int k) {
        TrackLabel l;
        l.origin = Origin::initial;
        l.origin_a = k;
        l.seed_digest();
        return l;
    }

    static TrackLabel birth(int scan, int pixel) {
        TrackLabel l;
        l.origin = Origin::birth;
        l.origin_a = scan;
        l.origin_b = pixel;
        l.seed_digest();
        return l;
    }

    /// Label after assigning measurement `meas` (or kNullAssoc) at `scan`.
    TrackLabel extended(int scan, int meas) const {
        TrackLabel l = *this;
        const std::uint64_t v = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(scan + 1)) << 32) |
                                static_cast<std::uint32_t>(meas + 2);
        l.digest0 = detail::splitmix64(l.digest0 ^ v);
        l.digest1 = detail::splitmix64(l.digest1 ^ (v * 0xda942042e4dd58b5ULL));
        if (l.first_measurement == kUnseen) l.first_measurement = meas;
        return l;
    }

    bool undetected_at_creation() const {
        return origin == Origin::birth && first_measurement == kNullAssoc;
    }

    auto key() const {
        return std::make_tuple(static_cast<int>(origin), origin_a, origin_b, digest0, digest1);
    }

    friend bool operator==(const TrackLabel& a, const TrackLabel& b) {
        return a.key() == b.key();
    }
    friend auto operator<=>(const TrackLabel& a, const TrackLabel& b) {
        return a.key() <=> b.key();
    }

    std::string to_string() const {
        char buf[64];
        if (origin == Origin::initial)
            std::snprintf(buf, sizeof(buf), "T%d:%016llx", origin_a,
                          static_cast<unsigned long long>(digest0));
        else
            std::snprintf(buf, sizeof(buf), "B%d.%d:%016llx", origin_a, origin_b,
                          static_cast<unsigned long long>(digest0));
        return buf;
    }

private:
    void seed_digest() {
        const std::uint64_t base =
            (static_cast<std::uint64_t>(origin_a) << 34) ^
            (static_cast<std::uint64_t>(origin_b) << 2) ^
            static_cast<std::uint64_t>(origin);
        digest0 = detail::splitmix64(base);
        digest1 = detail::splitmix64(base ^ 0x6a09e667f3bcc909ULL);
    }
};

} // namespace fisst
