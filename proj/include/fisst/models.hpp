#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <string>

#include "fisst/common.hpp"

namespace fisst {

/// Linear-Gaussian motion: x' = F x + G w with w ~ N(0, Q) per step.
struct MotionModel {
    Eigen::MatrixXd F; // d x d
    Eigen::MatrixXd G; // d x w
    Eigen::MatrixXd Q; // w x w

    int state_dim() const { return static_cast<int>(F.rows()); }

    /// G Q G', the per-step process-noise covariance in state space.
    Eigen::MatrixXd process_noise() const { return G * Q * G.transpose(); }

    void validate() const {
        if (F.rows() != F.cols()) throw DimensionError("motion: F must be square");
        if (G.rows() != F.rows()) throw DimensionError("motion: G row count must match state dim");
        if (Q.rows() != Q.cols() || Q.rows() != G.cols())
            throw DimensionError("motion: Q must be square with G's column count");
        if (!Q.isApprox(Q.transpose(), 1e-9)) throw NumericalError("motion: Q must be symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
        if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()))
            throw NumericalError("motion: Q must be positive semidefinite");
    }
};

/// Linear-Gaussian measurement: z = H x + v with v ~ N(0, R), detected w.p. p_d.
struct MeasurementModel {
    Eigen::MatrixXd H; // m_z x d
    Eigen::MatrixXd R; // m_z x m_z
    double p_d = 1.0;

    int meas_dim() const { return static_cast<int>(H.rows()); }
    int state_dim() const { return static_cast<int>(H.cols()); }

    void validate() const {
        if (R.rows() != R.cols() || R.rows() != H.rows())
            throw DimensionError("measurement: R must be square with H's row count");
        if (!R.isApprox(R.transpose(), 1e-9)) throw NumericalError("measurement: R must be symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(R);
        if (llt.info() != Eigen::Success)
            throw NumericalError("measurement: R must be positive definite");
        if (p_d < 0.0 || p_d > 1.0) throw RangeError("measurement: p_d must be in [0,1]");
    }
};

/// Poisson clutter, uniform over the sensor field of view of volume V.
struct ClutterModel {
    double lambda_c = 0.0; // rate per unit volume per scan
    double volume = 1.0;   // V

    /// Expected clutter count per scan, lambda_c * V.
    double mean_count() const { return lambda_c * volume; }

    void validate() const {
        if (lambda_c < 0.0) throw RangeError("clutter: lambda_c must be >= 0");
        if (volume <= 0.0) throw RangeError("clutter: volume must be > 0");
    }
};

/// Which single-target pdf a birth pixel produces.
enum class BirthBeliefMode {
    uniform,              // exact box density 1_pixel / pixel_volume
    gaussian_moment_match // Gaussian at the pixel center, box-moment covariance
};

/// Spatial binomial birth process over an axis-aligned uniform partition of
/// the field of view into M pixels, each occupied independently w.p. alpha.
/// With poisson_limit set, per-hypothesis weights use the limiting form
/// exp(-lambda_b V) (lambda_b Vbar)^p instead of the binomial
/// alpha^p (1-alpha)^(M-p).
struct BirthModel {
    Eigen::VectorXd fov_min;
    Eigen::VectorXd fov_max;
    Eigen::VectorXi pixels_per_axis;
    double alpha = 0.0;
    double lambda_b = 0.0;
    bool poisson_limit = false;
    BirthBeliefMode mode = BirthBeliefMode::gaussian_moment_match;

    int dim() const { return static_cast<int>(fov_min.size()); }

    int pixel_count() const {
        int m = 1;
        for (int a = 0; a < pixels_per_axis.size(); ++a) m *= pixels_per_axis(a);
        return m;
    }

    double fov_volume() const {
        double v = 1.0;
        for (int a = 0; a < dim(); ++a) v *= fov_max(a) - fov_min(a);
        return v;
    }

    double pixel_volume() const { return fov_volume() / pixel_count(); }

    Eigen::VectorXd pixel_width() const {
        Eigen::VectorXd w(dim());
        for (int a = 0; a < dim(); ++a)
            w(a) = (fov_max(a) - fov_min(a)) / pixels_per_axis(a);
        return w;
    }

    /// Axis-wise pixel coordinates of a flat index (last axis fastest).
    Eigen::VectorXi pixel_coords(int index) const {
        if (index < 0 || index >= pixel_count()) throw RangeError("birth: pixel index out of range");
        Eigen::VectorXi c(dim());
        for (int a = dim() - 1; a >= 0; --a) {
            c(a) = index % pixels_per_axis(a);
            index /= pixels_per_axis(a);
        }
        return c;
    }

    Eigen::VectorXd pixel_lo(int index) const {
        const Eigen::VectorXi c = pixel_coords(index);
        const Eigen::VectorXd w = pixel_width();
        Eigen::VectorXd lo(dim());
        for (int a = 0; a < dim(); ++a) lo(a) = fov_min(a) + c(a) * w(a);
        return lo;
    }

    Eigen::VectorXd pixel_hi(int index) const { return pixel_lo(index) + pixel_width(); }

    Eigen::VectorXd pixel_center(int index) const {
        return pixel_lo(index) + 0.5 * pixel_width();
    }

    /// Flat index of the pixel containing a point in FOV space, or -1.
    int pixel_index_of(const Eigen::VectorXd& x) const {
        if (x.size() != dim()) throw DimensionError("birth: point dimension mismatch");
        const Eigen::VectorXd w = pixel_width();
        int idx = 0;
        for (int a = 0; a < dim(); ++a) {
            if (x(a) < fov_min(a) || x(a) > fov_max(a)) return -1;
            int c = static_cast<int>((x(a) - fov_min(a)) / w(a));
            c = std::min(c, pixels_per_axis(a) - 1);
            idx = idx * pixels_per_axis(a) + c;
        }
        return idx;
    }

    void validate() const {
        if (fov_min.size() == 0 || fov_min.size() != fov_max.size() ||
            pixels_per_axis.size() != fov_min.size())
            throw DimensionError("birth: fov_min/fov_max/pixels_per_axis sizes must match");
        for (int a = 0; a < dim(); ++a) {
            if (fov_max(a) <= fov_min(a)) throw RangeError("birth: fov_max must exceed fov_min");
            if (pixels_per_axis(a) < 1) throw RangeError("birth: pixels_per_axis must be >= 1");
        }
        if (alpha < 0.0 || alpha > 1.0) throw RangeError("birth: alpha must be in [0,1]");
        if (lambda_b < 0.0) throw RangeError("birth: lambda_b must be >= 0");
        if (poisson_limit && std::abs(alpha - lambda_b * pixel_volume()) > 1e-12)
            throw RangeError("birth: poisson limit requires alpha == lambda_b * pixel_volume to 1e-12");
    }

    /// One pixel spanning [lo, hi] with births disabled.
    static BirthModel disabled(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
        BirthModel b;
        b.fov_min = lo;
        b.fov_max = hi;
        b.pixels_per_axis = Eigen::VectorXi::Ones(lo.size());
        b.alpha = 0.0;
        b.lambda_b = 0.0;
        return b;
    }
};

/// Per-scan, per-target survival probability beta.
struct SurvivalModel {
    double beta = 1.0;

    void validate() const {
        if (beta < 0.0 || beta > 1.0) throw RangeError("survival: beta must be in [0,1]");
    }
};

struct ScenarioModels {
    MotionModel motion;
    MeasurementModel measurement;
    ClutterModel clutter;
    BirthModel birth;
    SurvivalModel survival;

    void validate() const {
        motion.validate();
        measurement.validate();
        clutter.validate();
        birth.validate();
        survival.validate();
        if (measurement.state_dim() != motion.state_dim())
            throw DimensionError("models: H column count must match state dim");
        if (birth.dim() != motion.state_dim())
            throw DimensionError("models: birth FOV dim must match state dim");
        const bool birth_active = birth.alpha > 0.0 || birth.lambda_b > 0.0;
        if (birth_active && measurement.meas_dim() == motion.state_dim() &&
            std::abs(birth.fov_volume() - clutter.volume) >
                1e-9 * std::max(1.0, clutter.volume))
            throw RangeError("models: clutter volume must equal the birth FOV volume");
    }
};

// ---- Prior probabilities (log domain is the native representation) ----

/// Prior of a data association with m-k detections out of n targets and k
/// Poisson clutter returns:
///   p_d^(m-k) (1-p_d)^(n-(m-k)) e^(-lc V) (lc V)^k / k!
inline double log_association_prior(int n, int m, int k,
                                    const MeasurementModel& meas,
                                    const ClutterModel& clutter) {
    if (k < 0 || k > m) throw RangeError("association_prior: need 0 <= k <= m");
    if (m - k > n) throw DimensionError("association_prior: more detections than targets");
    if (n < 0) throw RangeError("association_prior: negative target count");
    const int detections = m - k;
    const double rate = clutter.mean_count();
    double lp = int_pow_log(detections, std::log(meas.p_d));
    lp += int_pow_log(n - detections, std::log1p(-meas.p_d));
    lp += -rate + int_pow_log(k, std::log(rate)) - std::lgamma(k + 1.0);
    return lp;
}

inline double association_prior(int n, int m, int k, const MeasurementModel& meas,
                                const ClutterModel& clutter) {
    return std::exp(log_association_prior(n, m, k, meas, clutter));
}

/// Probability of one specific p-birth hypothesis: alpha^p (1-alpha)^(M-p).
inline double log_birth_prior(int p, const BirthModel& birth) {
    if (p < 0 || p > birth.pixel_count())
        throw RangeError("birth_prior: need 0 <= p <= pixel count");
    return int_pow_log(p, std::log(birth.alpha)) +
           int_pow_log(birth.pixel_count() - p, std::log1p(-birth.alpha));
}

inline double birth_prior(int p, const BirthModel& birth) {
    return std::exp(log_birth_prior(p, birth));
}

/// Poisson-limit per-hypothesis birth weight: e^(-lb V) lb^p Vbar^p.
inline double log_birth_prior_poisson_limit(int p, const BirthModel& birth) {
    if (p < 0) throw RangeError("birth_prior_poisson_limit: negative birth count");
    return -birth.lambda_b * birth.fov_volume() +
           int_pow_log(p, std::log(birth.lambda_b) + std::log(birth.pixel_volume()));
}

inline double birth_prior_poisson_limit(int p, const BirthModel& birth) {
    return std::exp(log_birth_prior_poisson_limit(p, birth));
}

/// The per-hypothesis birth prior the engine uses: binomial, or the Poisson
/// limit when the model requests it.
inline double log_birth_hypothesis_prior(int p, const BirthModel& birth) {
    return birth.poisson_limit ? log_birth_prior_poisson_limit(p, birth)
                               : log_birth_prior(p, birth);
}

/// Probability of one specific survival hypothesis where p of r targets
/// survive: beta^p (1-beta)^(r-p).
inline double log_survival_prior(int p, int r, const SurvivalModel& surv) {
    if (p < 0 || p > r) throw RangeError("survival_prior: need 0 <= p <= r");
    return int_pow_log(p, std::log(surv.beta)) +
           int_pow_log(r - p, std::log1p(-surv.beta));
}

inline double survival_prior(int p, int r, const SurvivalModel& surv) {
    return std::exp(log_survival_prior(p, r, surv));
}

} // namespace fisst
