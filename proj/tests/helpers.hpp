#pragma once

#include <Eigen/Dense>

#include "fisst/models.hpp"

namespace fisst::testutil {

inline Eigen::MatrixXd mat1(double v) {
    Eigen::MatrixXd m(1, 1);
    m << v;
    return m;
}

inline Eigen::VectorXd vec1(double v) {
    Eigen::VectorXd x(1);
    x << v;
    return x;
}

inline MotionModel motion_1d(double f, double q) {
    return MotionModel{mat1(f), mat1(1.0), mat1(q)};
}

inline MeasurementModel meas_1d(double h, double r, double pd) {
    return MeasurementModel{mat1(h), mat1(r), pd};
}

inline BirthModel birth_1d(double lo, double hi, int pixels, double alpha,
                           bool poisson_limit = false,
                           BirthBeliefMode mode = BirthBeliefMode::gaussian_moment_match) {
    BirthModel b;
    b.fov_min = vec1(lo);
    b.fov_max = vec1(hi);
    b.pixels_per_axis = Eigen::VectorXi::Constant(1, pixels);
    b.alpha = alpha;
    b.lambda_b = alpha / ((hi - lo) / pixels);
    b.poisson_limit = poisson_limit;
    b.mode = mode;
    return b;
}

/// Scalar-state scenario: x' = f x + w, z = x + v, clutter uniform on the
/// birth FOV.
inline ScenarioModels models_1d(double f, double q, double r, double pd, double lambda_c,
                                double fov_lo = -10.0, double fov_hi = 10.0, int pixels = 4,
                                double alpha = 0.0, double beta = 1.0,
                                bool poisson_limit = false,
                                BirthBeliefMode mode = BirthBeliefMode::gaussian_moment_match) {
    ScenarioModels m;
    m.motion = motion_1d(f, q);
    m.measurement = meas_1d(1.0, r, pd);
    m.clutter = ClutterModel{lambda_c, fov_hi - fov_lo};
    m.birth = birth_1d(fov_lo, fov_hi, pixels, alpha, poisson_limit, mode);
    m.survival = SurvivalModel{beta};
    return m;
}

} // namespace fisst::testutil
