#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fisst/forest.hpp"
#include "fisst/hypothesis.hpp"
#include "fisst/models.hpp"
#include "fisst/rng.hpp"

// Slow, exact reference implementations used only by tests and the `verify`
// command: midpoint-rule quadrature on dense grids, explicit enumeration of
// associations and permutations, and the set-integral Bayes quotient. Nothing
// here shares the Kalman algebra of the engine path it checks.

namespace fisst::oracle {

struct GridAxis {
    double lo;
    double hi;
    int n;

    double h() const { return (hi - lo) / n; }
    double center(int i) const { return lo + (i + 0.5) * h(); }
};

struct GridSpec {
    std::vector<GridAxis> axes;

    explicit GridSpec(std::vector<GridAxis> a = {}) : axes(std::move(a)) {}

    int dim() const { return static_cast<int>(axes.size()); }

    std::size_t cells() const {
        std::size_t c = 1;
        for (const auto& a : axes) c *= a.n;
        return c;
    }

    double cell_volume() const {
        double v = 1.0;
        for (const auto& a : axes) v *= a.h();
        return v;
    }

    Eigen::VectorXd center(std::size_t flat) const {
        Eigen::VectorXd x(dim());
        for (int a = dim() - 1; a >= 0; --a) {
            x(a) = axes[a].center(static_cast<int>(flat % axes[a].n));
            flat /= axes[a].n;
        }
        return x;
    }
};

/// Nonnegative density sampled at cell midpoints; integrates to ~1.
struct GridBelief {
    GridSpec grid;
    Eigen::VectorXd density;

    double integral() const { return density.sum() * grid.cell_volume(); }

    void normalize() {
        const double z = integral();
        if (!(z > 0.0) || !std::isfinite(z))
            throw NumericalError("grid belief: cannot normalize zero mass");
        density /= z;
    }

    Eigen::VectorXd mean() const {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(grid.dim());
        for (std::size_t c = 0; c < grid.cells(); ++c) m += density(c) * grid.center(c);
        return m * grid.cell_volume();
    }

    Eigen::MatrixXd cov() const {
        const Eigen::VectorXd m = mean();
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(grid.dim(), grid.dim());
        for (std::size_t c = 0; c < grid.cells(); ++c) {
            const Eigen::VectorXd d = grid.center(c) - m;
            s += density(c) * d * d.transpose();
        }
        return s * grid.cell_volume();
    }

    static GridBelief from_gaussian(const GridSpec& grid, const GaussianBelief& g) {
        if (g.dim() != grid.dim()) throw DimensionError("grid belief: dimension mismatch");
        const Eigen::MatrixXd inv = g.cov.inverse();
        GridBelief out{grid, Eigen::VectorXd(grid.cells())};
        for (std::size_t c = 0; c < grid.cells(); ++c) {
            const Eigen::VectorXd d = grid.center(c) - g.mean;
            out.density(c) = std::exp(-0.5 * d.dot(inv * d));
        }
        out.normalize();
        return out;
    }

    /// Indicator/volume density by the midpoint convention (a cell belongs to
    /// the box iff its center does).
    static GridBelief from_box(const GridSpec& grid, const BoxBelief& b) {
        if (b.dim() != grid.dim()) throw DimensionError("grid belief: dimension mismatch");
        GridBelief out{grid, Eigen::VectorXd::Zero(grid.cells())};
        for (std::size_t c = 0; c < grid.cells(); ++c) {
            const Eigen::VectorXd x = grid.center(c);
            bool inside = true;
            for (int a = 0; a < grid.dim(); ++a)
                if (x(a) < b.lo(a) || x(a) > b.hi(a)) inside = false;
            if (inside) out.density(c) = 1.0;
        }
        out.normalize();
        return out;
    }

    static GridBelief from_belief(const GridSpec& grid, const Belief& b) {
        if (const auto* g = std::get_if<GaussianBelief>(&b)) return from_gaussian(grid, *g);
        return from_box(grid, std::get<BoxBelief>(b));
    }
};

namespace detail {

struct GaussianKernel {
    Eigen::MatrixXd inv;
    double log_norm;

    explicit GaussianKernel(const Eigen::MatrixXd& cov) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success)
            throw NumericalError("oracle: kernel covariance must be positive definite");
        inv = llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
        double log_det = 0.0;
        const Eigen::MatrixXd& L = llt.matrixL();
        for (int i = 0; i < L.rows(); ++i) log_det += 2.0 * std::log(L(i, i));
        log_norm = -0.5 * (cov.rows() * std::log(2.0 * M_PI) + log_det);
    }

    double operator()(const Eigen::VectorXd& residual) const {
        return std::exp(log_norm - 0.5 * residual.dot(inv * residual));
    }
};

/// All permutations of {0..n-1}; n is tiny by contract.
inline std::vector<std::vector<int>> permutations(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    std::vector<std::vector<int>> out;
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

/// The oracle's own association enumeration (kept separate from the engine's).
inline std::vector<std::vector<int>> associations(int n, int m) {
    std::vector<std::vector<int>> out;
    std::vector<int> assign(n, kNullAssoc);
    std::vector<bool> used(m, false);
    auto rec = [&](auto&& self, int t) -> void {
        if (t == n) {
            out.push_back(assign);
            return;
        }
        assign[t] = kNullAssoc;
        self(self, t + 1);
        for (int j = 0; j < m; ++j) {
            if (used[j]) continue;
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

inline std::vector<std::vector<int>> subsets(const std::vector<int>& items, int max_size) {
    std::vector<std::vector<int>> out;
    out.push_back({});
    for (int size = 1; size <= std::min<int>(max_size, static_cast<int>(items.size())); ++size) {
        std::vector<int> pick;
        auto rec = [&](auto&& self, std::size_t start) -> void {
            if (static_cast<int>(pick.size()) == size) {
                out.push_back(pick);
                return;
            }
            for (std::size_t i = start; i < items.size(); ++i) {
                pick.push_back(items[i]);
                self(self, i + 1);
                pick.pop_back();
            }
        };
        rec(rec, 0);
    }
    return out;
}

} // namespace detail

/// Chapman-Kolmogorov by direct quadrature:
/// p'(x) = sum_x' N(x; F x', G Q G') p(x') h^d.
inline GridBelief grid_predict(const GridBelief& gb, const MotionModel& motion) {
    const detail::GaussianKernel kernel(motion.process_noise());
    const std::size_t cells = gb.grid.cells();
    std::vector<Eigen::VectorXd> centers(cells), propagated(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        centers[c] = gb.grid.center(c);
        propagated[c] = motion.F * centers[c];
    }
    GridBelief out{gb.grid, Eigen::VectorXd::Zero(cells)};
    const double dv = gb.grid.cell_volume();
    for (std::size_t src = 0; src < cells; ++src) {
        const double w = gb.density(src) * dv;
        if (w == 0.0) continue;
        for (std::size_t dst = 0; dst < cells; ++dst)
            out.density(dst) += w * kernel(centers[dst] - propagated[src]);
    }
    return out;
}

/// log of sum_x N(z; H x, R) p(x) h^d.
inline double grid_log_marginal_likelihood(const GridBelief& gb, const Eigen::VectorXd& z,
                                           const MeasurementModel& meas) {
    const detail::GaussianKernel kernel(meas.R);
    double acc = 0.0;
    for (std::size_t c = 0; c < gb.grid.cells(); ++c)
        acc += gb.density(c) * kernel(z - meas.H * gb.grid.center(c));
    acc *= gb.grid.cell_volume();
    return std::log(acc);
}

/// Pointwise Bayes update on the grid.
inline GridBelief grid_update(const GridBelief& gb, const Eigen::VectorXd& z,
                              const MeasurementModel& meas) {
    const detail::GaussianKernel kernel(meas.R);
    GridBelief out{gb.grid, Eigen::VectorXd(gb.grid.cells())};
    for (std::size_t c = 0; c < gb.grid.cells(); ++c)
        out.density(c) = gb.density(c) * kernel(z - meas.H * gb.grid.center(c));
    out.normalize();
    return out;
}

/// Product-form multi-target pdf: the symmetrized density is
/// sum_nu prod_i components[i](x_{nu_i}).
struct SymmetricMTpdf {
    std::vector<GridBelief> components;

    int n() const { return static_cast<int>(components.size()); }

    /// Symmetrized density evaluated at a tuple of cell indices.
    double symmetrized_density(const std::vector<std::size_t>& cells) const {
        if (static_cast<int>(cells.size()) != n())
            throw DimensionError("symmetrized_density: tuple size must equal cardinality");
        double total = 0.0;
        for (const auto& nu : detail::permutations(n())) {
            double prod = 1.0;
            for (int i = 0; i < n(); ++i) prod *= components[i].density(cells[nu[i]]);
            total += prod;
        }
        return total;
    }
};

inline constexpr std::size_t kMaxTensorSize = 4'000'000;

/// Materialize the symmetrized n-target density on the n-fold product grid.
/// Integrates to n! (the set-integral convention divides this back out).
inline Eigen::VectorXd materialize_symmetrized(const SymmetricMTpdf& mt) {
    const std::size_t cells = mt.components.empty() ? 1 : mt.components[0].grid.cells();
    std::size_t total = 1;
    for (int i = 0; i < mt.n(); ++i) {
        total *= cells;
        if (total > kMaxTensorSize) throw ExplosionError("materialize_symmetrized: tensor too large");
    }
    Eigen::VectorXd tensor(total);
    std::vector<std::size_t> tuple(mt.n(), 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rest = flat;
        for (int i = mt.n() - 1; i >= 0; --i) {
            tuple[i] = rest % cells;
            rest /= cells;
        }
        tensor(flat) = mt.symmetrized_density(tuple);
    }
    return tensor;
}

/// Prediction with birth, component route: every component is pushed through
/// the transition quadrature and one fresh birth pdf is appended per
/// hypothesized pixel (in the model's configured representation).
inline SymmetricMTpdf oracle_predict(const SymmetricMTpdf& mt, const BirthHypothesis& birth_hyp,
                                     const ScenarioModels& models) {
    if (mt.n() == 0 && birth_hyp.births() == 0) return mt;
    const GridSpec grid = mt.n() > 0 ? mt.components[0].grid : GridSpec{};
    SymmetricMTpdf out;
    for (const auto& comp : mt.components) out.components.push_back(grid_predict(comp, models.motion));
    for (int pixel : birth_hyp.pixels) {
        if (mt.n() == 0) throw RangeError("oracle_predict: birth into empty pdf needs a grid");
        out.components.push_back(GridBelief::from_belief(grid, birth_pdf(pixel, models.birth)));
    }
    return out;
}

/// Prediction with birth, tensor route: integrates the symmetrized
/// multi-target transition density against the symmetrized prior directly,
///   T'(X) = (1/r!) sum_X' [sum_nu prod K(x_{nu_i}|x'_i) prod b(x_{nu_i})] T(X') h^(r d).
/// Used to check the product form numerically.
inline Eigen::VectorXd predict_tensor(const SymmetricMTpdf& prior, const BirthHypothesis& birth_hyp,
                                      const ScenarioModels& models) {
    const int r = prior.n();
    const int n = r + birth_hyp.births();
    if (r == 0) throw RangeError("predict_tensor: need at least one prior component");
    const GridSpec& grid = prior.components[0].grid;
    const std::size_t cells = grid.cells();

    std::size_t out_size = 1, in_size = 1;
    for (int i = 0; i < n; ++i) out_size *= cells;
    for (int i = 0; i < r; ++i) in_size *= cells;
    if (out_size > kMaxTensorSize || in_size > kMaxTensorSize)
        throw ExplosionError("predict_tensor: tensor too large");

    const Eigen::VectorXd prior_tensor = materialize_symmetrized(prior);
    const detail::GaussianKernel kernel(models.motion.process_noise());

    std::vector<Eigen::VectorXd> centers(cells), propagated(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        centers[c] = grid.center(c);
        propagated[c] = models.motion.F * centers[c];
    }
    std::vector<GridBelief> birth_pdfs;
    for (int pixel : birth_hyp.pixels)
        birth_pdfs.push_back(GridBelief::from_belief(grid, birth_pdf(pixel, models.birth)));

    double r_factorial = 1.0;
    for (int i = 2; i <= r; ++i) r_factorial *= i;
    const double in_volume = std::pow(grid.cell_volume(), r);
    const auto perms = detail::permutations(n);

    Eigen::VectorXd out = Eigen::VectorXd::Zero(out_size);
    std::vector<std::size_t> xt(n), xs(r);
    for (std::size_t of = 0; of < out_size; ++of) {
        std::size_t rest = of;
        for (int i = n - 1; i >= 0; --i) {
            xt[i] = rest % cells;
            rest /= cells;
        }
        double acc = 0.0;
        for (std::size_t inf = 0; inf < in_size; ++inf) {
            const double pw = prior_tensor(inf);
            if (pw == 0.0) continue;
            rest = inf;
            for (int i = r - 1; i >= 0; --i) {
                xs[i] = rest % cells;
                rest /= cells;
            }
            double trans = 0.0;
            for (const auto& nu : perms) {
                double prod = 1.0;
                for (int i = 0; i < r && prod != 0.0; ++i)
                    prod *= kernel(centers[xt[nu[i]]] - propagated[xs[i]]);
                for (int i = r; i < n && prod != 0.0; ++i)
                    prod *= birth_pdfs[i - r].density(xt[nu[i]]);
                trans += prod;
            }
            acc += trans * pw;
        }
        out(of) = acc * in_volume / r_factorial;
    }
    return out;
}

/// One data-association child of the update, with its unnormalized weight
/// numerator (log) and posterior components.
struct OracleChild {
    std::vector<int> assignment;
    double log_weight;
    SymmetricMTpdf posterior;
};

struct OracleUpdate {
    std::vector<OracleChild> children;
    double log_normalizer; // log-sum-exp of the children's numerators
};

/// Bayes update of a predicted product-form pdf: enumerates every data
/// association, forms each numerator
///   p(sigma|n) (k!/V^k) prod_detected [grid marginal likelihood]
/// and updates the affected components pointwise on the grid.
inline OracleUpdate oracle_update(const SymmetricMTpdf& mt, const std::vector<Eigen::VectorXd>& Z,
                                  const ScenarioModels& models) {
    const int n = mt.n();
    const int m = static_cast<int>(Z.size());
    OracleUpdate out;
    std::vector<double> lws;
    for (const auto& assign : detail::associations(n, m)) {
        int detections = 0;
        for (int j : assign)
            if (j != kNullAssoc) ++detections;
        const int k = m - detections;
        double lw = log_association_prior(n, m, k, models.measurement, models.clutter) +
                    std::lgamma(k + 1.0) - int_pow_log(k, std::log(models.clutter.volume));
        SymmetricMTpdf post;
        post.components.reserve(n);
        for (int i = 0; i < n; ++i) {
            if (assign[i] == kNullAssoc) {
                post.components.push_back(mt.components[i]);
            } else {
                lw += grid_log_marginal_likelihood(mt.components[i], Z[assign[i]],
                                                   models.measurement);
                post.components.push_back(
                    grid_update(mt.components[i], Z[assign[i]], models.measurement));
            }
        }
        lws.push_back(lw);
        out.children.push_back(OracleChild{assign, lw, std::move(post)});
    }
    out.log_normalizer = log_sum_exp(lws);
    return out;
}

/// The same normalizer via the set-integral route: materializes the
/// symmetrized predicted tensor and integrates the full multi-target
/// likelihood against it with the 1/n! convention,
///   (1/n!) sum_X [sum_sigma p(sigma|n) (k!/V^k) prod p(z|x)] T(X) h^(n d).
inline double log_set_integral_likelihood(const SymmetricMTpdf& mt,
                                          const std::vector<Eigen::VectorXd>& Z,
                                          const ScenarioModels& models) {
    const int n = mt.n();
    const int m = static_cast<int>(Z.size());
    if (n == 0) {
        return log_association_prior(0, m, m, models.measurement, models.clutter) +
               std::lgamma(m + 1.0) - int_pow_log(m, std::log(models.clutter.volume));
    }
    const GridSpec& grid = mt.components[0].grid;
    const std::size_t cells = grid.cells();
    const Eigen::VectorXd tensor = materialize_symmetrized(mt);
    const detail::GaussianKernel kernel(models.measurement.R);
    const auto assigns = detail::associations(n, m);

    std::vector<double> assoc_prior(assigns.size());
    for (std::size_t a = 0; a < assigns.size(); ++a) {
        int detections = 0;
        for (int j : assigns[a])
            if (j != kNullAssoc) ++detections;
        const int k = m - detections;
        assoc_prior[a] =
            std::exp(log_association_prior(n, m, k, models.measurement, models.clutter) +
                     std::lgamma(k + 1.0) - int_pow_log(k, std::log(models.clutter.volume)));
    }

    // Per (cell, measurement) single-target likelihood table.
    Eigen::MatrixXd like(cells, m);
    for (std::size_t c = 0; c < cells; ++c)
        for (int j = 0; j < m; ++j)
            like(c, j) = kernel(Z[j] - models.measurement.H * grid.center(c));

    double n_factorial = 1.0;
    for (int i = 2; i <= n; ++i) n_factorial *= i;

    double acc = 0.0;
    std::vector<std::size_t> tuple(n);
    for (std::size_t flat = 0; flat < static_cast<std::size_t>(tensor.size()); ++flat) {
        const double t = tensor(flat);
        if (t == 0.0) continue;
        std::size_t rest = flat;
        for (int i = n - 1; i >= 0; --i) {
            tuple[i] = rest % cells;
            rest /= cells;
        }
        double mt_like = 0.0;
        for (std::size_t a = 0; a < assigns.size(); ++a) {
            double prod = assoc_prior[a];
            for (int i = 0; i < n && prod != 0.0; ++i)
                if (assigns[a][i] != kNullAssoc) prod *= like(tuple[i], assigns[a][i]);
            mt_like += prod;
        }
        acc += mt_like * t;
    }
    acc *= std::pow(grid.cell_volume(), n) / n_factorial;
    return std::log(acc);
}

// ---- Grid-based mirror of the full per-scan recursion ----

struct OracleTrack {
    TrackLabel label;
    GridBelief belief;
};

struct OracleHypothesis {
    std::vector<OracleTrack> tracks;
    double log_weight = 0.0;

    void canonicalize() {
        std::sort(tracks.begin(), tracks.end(),
                  [](const OracleTrack& a, const OracleTrack& b) { return a.label < b.label; });
    }

    std::string key_string() const {
        std::string s;
        for (std::size_t i = 0; i < tracks.size(); ++i) {
            if (i) s += ",";
            s += tracks[i].label.to_string();
        }
        return s.empty() ? "<empty>" : s;
    }
};

struct OracleForest {
    GridSpec grid;
    std::vector<OracleHypothesis> hypotheses;
    int scan_index = 0;
};

inline OracleForest oracle_initial_forest(const GridSpec& grid,
                                          const std::vector<GaussianBelief>& targets) {
    OracleForest f;
    f.grid = grid;
    OracleHypothesis h;
    for (std::size_t k = 0; k < targets.size(); ++k)
        h.tracks.push_back(OracleTrack{TrackLabel::initial_target(static_cast<int>(k)),
                                       GridBelief::from_gaussian(grid, targets[k])});
    h.canonicalize();
    f.hypotheses.push_back(std::move(h));
    return f;
}

/// Exhaustive (survival, birth, association) expansion of every hypothesis on
/// the grid, ungated and unpruned, sharing only the scalar prior formulas
/// with the engine.
inline void oracle_step(OracleForest& forest, const std::vector<Eigen::VectorXd>& Z,
                        const ScenarioModels& models, int max_births = 2,
                        std::size_t cap = 50'000) {
    const int scan = forest.scan_index;

    std::vector<int> all_pixels(models.birth.pixel_count());
    for (int p = 0; p < models.birth.pixel_count(); ++p) all_pixels[p] = p;
    const bool birth_active = models.birth.alpha > 0.0 || models.birth.lambda_b > 0.0;
    const auto birth_sets =
        detail::subsets(all_pixels, birth_active ? max_births : 0);

    std::vector<OracleHypothesis> children;
    for (const auto& parent : forest.hypotheses) {
        const int r = static_cast<int>(parent.tracks.size());
        std::vector<GridBelief> predicted;
        predicted.reserve(r);
        for (const auto& t : parent.tracks) predicted.push_back(grid_predict(t.belief, models.motion));

        std::vector<int> slots_all(r);
        for (int i = 0; i < r; ++i) slots_all[i] = i;
        for (const auto& surv : detail::subsets(slots_all, r)) {
            const double lp_surv =
                log_survival_prior(static_cast<int>(surv.size()), r, models.survival);
            if (lp_surv == kNegInf) continue;
            for (const auto& pixels : birth_sets) {
                const double lp_birth =
                    log_birth_hypothesis_prior(static_cast<int>(pixels.size()), models.birth);
                if (lp_birth == kNegInf) continue;

                SymmetricMTpdf pred;
                std::vector<TrackLabel> labels;
                for (int idx : surv) {
                    pred.components.push_back(predicted[idx]);
                    labels.push_back(parent.tracks[idx].label);
                }
                for (int pixel : pixels) {
                    pred.components.push_back(
                        GridBelief::from_belief(forest.grid, birth_pdf(pixel, models.birth)));
                    labels.push_back(TrackLabel::birth(scan, pixel));
                }

                OracleUpdate upd = oracle_update(pred, Z, models);
                for (auto& child : upd.children) {
                    OracleHypothesis oh;
                    oh.log_weight = parent.log_weight + lp_surv + lp_birth + child.log_weight;
                    if (oh.log_weight == kNegInf) continue;
                    for (std::size_t i = 0; i < labels.size(); ++i)
                        oh.tracks.push_back(OracleTrack{
                            labels[i].extended(scan, child.assignment[i]),
                            std::move(child.posterior.components[i])});
                    oh.canonicalize();
                    if (children.size() >= cap)
                        throw ExplosionError("oracle_step: cap exceeded", scan);
                    children.push_back(std::move(oh));
                }
            }
        }
    }

    // normalize, then merge identical label multisets
    std::vector<double> lws;
    for (const auto& c : children) lws.push_back(c.log_weight);
    const double lse = log_sum_exp(lws);
    if (!std::isfinite(lse)) throw NumericalError("oracle_step: zero total weight");
    std::map<std::string, std::size_t> seen;
    std::vector<OracleHypothesis> merged;
    for (auto& c : children) {
        c.log_weight -= lse;
        auto [it, inserted] = seen.emplace(c.key_string(), merged.size());
        if (inserted)
            merged.push_back(std::move(c));
        else
            merged[it->second].log_weight = log_add_exp(merged[it->second].log_weight, c.log_weight);
    }
    forest.hypotheses = std::move(merged);
    forest.scan_index = scan + 1;
}

inline std::map<std::string, double> oracle_weight_map(const OracleForest& forest) {
    std::map<std::string, double> m;
    for (const auto& h : forest.hypotheses) m[h.key_string()] += std::exp(h.log_weight);
    return m;
}

// ---- Engine/oracle agreement ----

struct AgreementReport {
    double max_rel_weight_error = 0.0;
    double max_cardinality_error = 0.0;
    std::size_t hypotheses_compared = 0;
    bool keys_match = true;
};

/// Run the engine (exact settings) and the grid oracle over the same frames
/// and compare normalized hypothesis weights, keyed by track-label multiset.
/// Weights below `floor` on both sides are skipped; quadrature noise
/// dominates only far below any mass of interest.
inline AgreementReport compare_engine_oracle(const ScenarioModels& models,
                                             const std::vector<GaussianBelief>& initial,
                                             const std::vector<std::vector<Eigen::VectorXd>>& frames,
                                             const GridSpec& grid, int max_births,
                                             double floor = 1e-10) {
    StepOptions opts;
    opts.pruning = PruningPolicy::none();
    opts.birth_policy = BirthEnumerationPolicy::all_pixels(max_births);
    HypothesisForest engine = initial_forest(initial);
    OracleForest reference = oracle_initial_forest(grid, initial);

    AgreementReport rep;
    for (const auto& Z : frames) {
        engine = fisst_step(engine, Z, models, opts);
        oracle_step(reference, Z, models, max_births);

        const auto ew = forest_weight_map(engine);
        const auto ow = oracle_weight_map(reference);
        for (const auto& [key, we] : ew) {
            const auto it = ow.find(key);
            const double wo = (it == ow.end()) ? 0.0 : it->second;
            if (we < floor && wo < floor) continue;
            if (it == ow.end()) {
                rep.keys_match = false;
                continue;
            }
            rep.max_rel_weight_error = std::max(
                rep.max_rel_weight_error, std::abs(we - wo) / std::max(std::abs(wo), floor));
            ++rep.hypotheses_compared;
        }
        for (const auto& [key, wo] : ow)
            if (wo >= floor && ew.find(key) == ew.end()) rep.keys_match = false;

        std::map<int, double> card_o;
        for (const auto& h : reference.hypotheses)
            card_o[static_cast<int>(h.tracks.size())] += std::exp(h.log_weight);
        for (const auto& [n_val, p_e] : cardinality_distribution(engine)) {
            const double p_o = card_o.count(n_val) ? card_o[n_val] : 0.0;
            rep.max_cardinality_error = std::max(rep.max_cardinality_error, std::abs(p_e - p_o));
        }
    }
    return rep;
}

// ---- Track uniqueness ----

struct UniquenessReport {
    double min_distance = std::numeric_limits<double>::infinity();
    std::string label_a;
    std::string label_b;
    int scan = -1;
    std::size_t tracks_checked = 0;

    bool collision_detected(double tol = 1e-9) const { return min_distance <= tol; }
};

/// sup-norm distance between two beliefs in (mean, cov) parameters.
inline double belief_distance(const Belief& a, const Belief& b) {
    const Eigen::VectorXd dm = belief_mean(a) - belief_mean(b);
    const Eigen::MatrixXd dc = belief_cov(a) - belief_cov(b);
    return std::max(dm.cwiseAbs().maxCoeff(), dc.cwiseAbs().maxCoeff());
}

/// Runs the unpruned engine over self-generated measurements and reports the
/// minimum pairwise (mean, cov) distance between distinct track labels, scan
/// by scan. A zero distance means two different histories produced the same
/// belief. `measurement_override` substitutes a fixed measurement sequence
/// (used by the injected-collision negative control).
inline UniquenessReport track_uniqueness_experiment(
    std::uint64_t seed, int scans, const ScenarioModels& models,
    const std::vector<GaussianBelief>& initial_targets,
    const std::vector<std::vector<Eigen::VectorXd>>* measurement_override = nullptr) {
    Rng rng(seed);
    const int d = models.motion.state_dim();

    // sample truth states for the initial targets; simple fixed-n generation
    std::vector<Eigen::VectorXd> truth;
    for (const auto& g : initial_targets) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov);
        Eigen::VectorXd x = g.mean;
        for (int i = 0; i < d; ++i) {
            const double lam = std::max(0.0, es.eigenvalues()(i));
            x += std::sqrt(lam) * rng.normal() * es.eigenvectors().col(i);
        }
        truth.push_back(x);
    }

    StepOptions opts;
    opts.pruning = PruningPolicy::none();
    opts.birth_policy = BirthEnumerationPolicy::all_pixels(1);
    HypothesisForest forest = initial_forest(initial_targets);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> q_es(models.motion.process_noise());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> r_es(models.measurement.R);

    UniquenessReport rep;
    for (int t = 0; t < scans; ++t) {
        std::vector<Eigen::VectorXd> Z;
        if (measurement_override) {
            Z = (*measurement_override)[t];
        } else {
            for (auto& x : truth) {
                Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
                for (int i = 0; i < d; ++i)
                    w += std::sqrt(std::max(0.0, q_es.eigenvalues()(i))) * rng.normal() *
                         q_es.eigenvectors().col(i);
                x = models.motion.F * x + w;
                if (rng.uniform01() < models.measurement.p_d) {
                    Eigen::VectorXd v = Eigen::VectorXd::Zero(models.measurement.meas_dim());
                    for (int i = 0; i < models.measurement.meas_dim(); ++i)
                        v += std::sqrt(std::max(0.0, r_es.eigenvalues()(i))) * rng.normal() *
                             r_es.eigenvectors().col(i);
                    Z.push_back(models.measurement.H * x + v);
                }
            }
            const int clutter_n = rng.poisson(models.clutter.mean_count());
            for (int c = 0; c < clutter_n; ++c) {
                Eigen::VectorXd z(models.measurement.meas_dim());
                for (int i = 0; i < models.measurement.meas_dim(); ++i)
                    z(i) = rng.uniform(models.birth.fov_min(std::min(i, d - 1)),
                                       models.birth.fov_max(std::min(i, d - 1)));
                Z.push_back(z);
            }
        }

        forest = fisst_step(forest, Z, models, opts);

        std::map<LabelKey, const Belief*> tracks;
        for (const auto& h : forest.hypotheses)
            for (const auto& tr : h.tracks) tracks.emplace(tr.label.key(), &tr.belief);
        std::vector<std::pair<LabelKey, const Belief*>> flat(tracks.begin(), tracks.end());
        rep.tracks_checked += flat.size();
        for (std::size_t i = 0; i < flat.size(); ++i) {
            for (std::size_t j = i + 1; j < flat.size(); ++j) {
                const double dist = belief_distance(*flat[i].second, *flat[j].second);
                if (dist < rep.min_distance) {
                    rep.min_distance = dist;
                    rep.scan = forest.scan_index;
                    TrackLabel la, lb;
                    for (const auto& h : forest.hypotheses)
                        for (const auto& tr : h.tracks) {
                            if (tr.label.key() == flat[i].first) la = tr.label;
                            if (tr.label.key() == flat[j].first) lb = tr.label;
                        }
                    rep.label_a = la.to_string();
                    rep.label_b = lb.to_string();
                }
            }
        }
    }
    return rep;
}

} // namespace fisst::oracle
