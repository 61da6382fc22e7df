#pragma once

// Rare-event Monte Carlo for P(min_{[a,b]} X > u) on a discretized path.
//
// The support vector X_S is drawn from N(u 1, Sigma) and the residual path Z
// independently from its exact conditional law; the path is X = A X_S + Z with
// A the conditional-mean map.  The likelihood ratio only involves X_S:
//   LR = exp(-u theta' X_S + u^2 / (2 V*)).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gpmin/asymptotics.hpp"
#include "gpmin/errors.hpp"
#include "gpmin/gram.hpp"
#include "gpmin/kernels.hpp"
#include "gpmin/measure_solver.hpp"
#include "gpmin/parallel.hpp"
#include "gpmin/residual.hpp"

namespace gpmin {

/// Low-rank Cholesky-type factor F with F F' ~= G (diagonal pivoting, early stop).
struct LowRankFactor {
    Eigen::MatrixXd factor;  // n x rank
    double jitter = 0.0;     // diagonal jitter that was added to G, if any
    double residual = 0.0;   // max |F F' - G|
    Eigen::Index rank() const { return factor.cols(); }
};

inline LowRankFactor pivoted_cholesky(const Eigen::MatrixXd &g, double rel_tol = 1e-13) {
    const Eigen::Index n = g.rows();
    detail::require(n > 0 && g.cols() == n, "pivoted_cholesky needs a square matrix");
    const double gmax = std::max(g.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    LowRankFactor out;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const double jitter = attempt == 0 ? 0.0 : 1e-10 * g.diagonal().maxCoeff();
        Eigen::VectorXd d = g.diagonal().array() + jitter;
        const double dmax = d.maxCoeff();
        Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
        Eigen::Index rank = 0;
        for (; rank < n; ++rank) {
            Eigen::Index p = 0;
            const double pivot = d.maxCoeff(&p);
            if (!(pivot > rel_tol * dmax)) { break; }
            const double root = std::sqrt(pivot);
            Eigen::VectorXd col = g.col(p);
            col(p) += jitter;
            if (rank > 0) { col.noalias() -= l.leftCols(rank) * l.row(p).head(rank).transpose(); }
            l.col(rank) = col / root;
            l(p, rank) = root;
            d -= l.col(rank).cwiseAbs2();
            d(p) = 0.0;
        }
        out.factor = l.leftCols(rank);
        out.jitter = jitter;
        out.residual = (out.factor * out.factor.transpose() - g).cwiseAbs().maxCoeff();
        if (out.residual <= 1e-8 * gmax) { break; }
    }
    return out;
}

/// Sorted evaluation points in [a,b]: a uniform grid unioned with the required points.
struct PathGrid {
    Interval interval;
    std::vector<double> points;
    double spacing = 0.0;
    LowRankFactor factor;  // of the path covariance on `points`

    [[nodiscard]] std::size_t size() const { return points.size(); }

    [[nodiscard]] std::size_t index_of(double t) const {
        const auto it = std::min_element(points.begin(), points.end(),
                                         [&](double x, double y) { return std::abs(x - t) < std::abs(y - t); });
        return static_cast<std::size_t>(it - points.begin());
    }

    static PathGrid build(const Kernel &kernel, const Interval &interval, int m, std::span<const double> include = {}) {
        detail::require(m >= 2 || interval.degenerate(), "path grid needs m >= 2");
        PathGrid out;
        out.interval = interval;
        out.points = uniform_grid(interval, m);
        out.spacing = interval.degenerate() ? 0.0 : interval.length() / (m - 1);
        const double tol = 1e-9 * std::max(1.0, interval.length());
        for (double t : include) {
            detail::require(interval.contains(t), "grid point outside the interval");
            bool present = false;
            for (double &p : out.points) {
                if (std::abs(p - t) <= tol) {
                    p = t;
                    present = true;
                }
            }
            if (!present) { out.points.push_back(t); }
        }
        std::sort(out.points.begin(), out.points.end());
        out.factor = pivoted_cholesky(covariance_matrix(kernel, out.points));
        return out;
    }
};

/// n unconditional centered Gaussian paths on the grid, one per column.
inline Eigen::MatrixXd sample_paths(const PathGrid &grid, long n, std::uint64_t seed, int threads = 0) {
    detail::require(n > 0, "sample_paths needs n > 0");
    const auto m = static_cast<Eigen::Index>(grid.size());
    const Eigen::Index rank = grid.factor.rank();
    const auto sizes = chunk_sizes(static_cast<std::size_t>(n));
    const auto blocks = run_chunks<Eigen::MatrixXd>(sizes.size(), worker_count(threads), [&](std::size_t chunk) {
        std::mt19937_64 rng(stream_seed(seed, chunk));
        std::normal_distribution<double> normal;
        Eigen::MatrixXd xi(rank, static_cast<Eigen::Index>(sizes[chunk]));
        for (Eigen::Index j = 0; j < xi.cols(); ++j) {
            for (Eigen::Index i = 0; i < rank; ++i) { xi(i, j) = normal(rng); }
        }
        return Eigen::MatrixXd(grid.factor.factor * xi);
    });
    Eigen::MatrixXd out(m, n);
    Eigen::Index col = 0;
    for (const auto &b : blocks) {
        out.middleCols(col, b.cols()) = b;
        col += b.cols();
    }
    return out;
}

struct MCOptions {
    long n = 1000000;
    std::uint64_t seed = 12345;
    int threads = 0;
    double window_factor = 5.0;  // argmin-to-atom window radius in grid spacings
};

/// Mean-shifted sampler of paths given the support.
class TiltedSampler {
public:
    TiltedSampler(const Kernel &kernel, const PathGrid &grid, const AsymptoticReport &report)
        : proj_(kernel, report.support), theta_(report.theta), v_star_(report.v_star) {
        std::vector<GramPoint> fns;
        for (double t : grid.points) { fns.push_back({t, 0}); }
        mean_map_ = proj_.mean_map(fns);
        Eigen::MatrixXd zcov = proj_.residual_covariance(fns);
        support_index_.resize(report.support.size());
        for (std::size_t j = 0; j < report.support.size(); ++j) {
            const std::size_t idx = grid.index_of(report.support[j]);
            detail::require(grid.points[idx] == report.support[j], "grid must contain every support point");
            support_index_[j] = idx;
            // Z vanishes identically on the support
            zcov.row(static_cast<Eigen::Index>(idx)).setZero();
            zcov.col(static_cast<Eigen::Index>(idx)).setZero();
        }
        z_factor_ = pivoted_cholesky(zcov);
        for (std::size_t j = 0; j < support_index_.size(); ++j) {
            const auto idx = static_cast<Eigen::Index>(support_index_[j]);
            z_factor_.factor.row(idx).setZero();
            mean_map_.row(idx).setZero();
            mean_map_(idx, static_cast<Eigen::Index>(j)) = 1.0;
        }
        mu_ = mean_map_.rowwise().sum();
    }

    [[nodiscard]] const Eigen::MatrixXd &mean_map() const { return mean_map_; }
    [[nodiscard]] const LowRankFactor &z_factor() const { return z_factor_; }
    [[nodiscard]] const Eigen::VectorXd &mu() const { return mu_; }
    [[nodiscard]] const std::vector<std::size_t> &support_index() const { return support_index_; }
    [[nodiscard]] const Eigen::VectorXd &theta() const { return theta_; }
    [[nodiscard]] double v_star() const { return v_star_; }
    [[nodiscard]] const ConditionalProjection &projection() const { return proj_; }

    /// log LR = -shift theta' x_s + shift^2 / (2 V*)
    [[nodiscard]] double log_likelihood_ratio(double shift, const Eigen::Ref<const Eigen::VectorXd> &x_s) const {
        return -shift * theta_.dot(x_s) + shift * shift / (2.0 * v_star_);
    }

private:
    ConditionalProjection proj_;
    Eigen::VectorXd theta_;
    double v_star_;
    Eigen::MatrixXd mean_map_;
    LowRankFactor z_factor_;
    Eigen::VectorXd mu_;
    std::vector<std::size_t> support_index_;
};

/// Log-density of N(mean, Sigma) at x, used to check the likelihood ratio pointwise.
inline double gaussian_log_density(const Eigen::LLT<Eigen::MatrixXd> &llt, const Eigen::VectorXd &mean,
                                   const Eigen::VectorXd &x) {
    const Eigen::VectorXd y = llt.matrixL().solve(x - mean);
    const Eigen::MatrixXd lm = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < lm.rows(); ++i) { logdet += 2.0 * std::log(lm(i, i)); }
    return -0.5 * y.squaredNorm() - 0.5 * logdet - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
}

/// One accepted path of the tilted run.
struct AcceptedSample {
    double lr = 0.0;
    double overshoot = 0.0;  // u (min - u)
    std::size_t argmin = 0;  // leftmost grid argmin
    std::vector<double> atom_overshoot;  // u (X_{t_j} - u)
};

struct MCWarning {
    bool low_ess = false;       // ess < 100
    bool low_accepted = false;  // ess of the accepted ensemble < 500
};

/// Weighted ensemble of paths conditioned on min > u.
struct ConditionalEnsemble {
    double u = 0.0;
    long n = 0;
    std::vector<AcceptedSample> samples;
    std::vector<double> weights;  // self-normalized LR weights
    Eigen::VectorXd fluctuation_mean;  // weighted mean of X - u mu on the grid
    Eigen::VectorXd fluctuation_var;
    double ess = 0.0;
    MCWarning warning;
};

struct ArgminHistogram {
    std::vector<double> atoms;
    std::vector<double> frequencies;
    double off_atom = 0.0;
};

struct OvershootStats {
    double mean = 0.0;
    double ks = 0.0;  // weighted KS distance vs the exponential limit
};

struct MCReport {
    double u = 0.0;
    long n = 0;
    std::uint64_t seed = 0;
    int grid_m = 0;
    double jitter = 0.0;
    double p_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double formula_value = std::numeric_limits<double>::quiet_NaN();
    double ratio = std::numeric_limits<double>::quiet_NaN();
    double ess = 0.0;
    long accepted = 0;
    OvershootStats overshoot;
    ArgminHistogram argmin;
    std::vector<OvershootStats> atom_overshoot;  // per atom, vs Exp(theta_j)
    double max_atom_correlation = 0.0;
    MCWarning warning;
};

namespace detail {

struct TiltedChunk {
    double sum_y = 0.0;
    double sum_y2 = 0.0;
    long accepted = 0;
    std::vector<AcceptedSample> samples;
    Eigen::VectorXd fl_sum;
    Eigen::VectorXd fl_sq;
};

inline std::vector<TiltedChunk> tilted_run(const TiltedSampler &sampler, std::size_t m, double u, long n,
                                           std::uint64_t seed, int threads) {
    const double shift = std::max(u, 0.0);
    const auto k = static_cast<Eigen::Index>(sampler.theta().size());
    const Eigen::MatrixXd lower = sampler.projection().sigma_llt().matrixL();
    const Eigen::MatrixXd &a = sampler.mean_map();
    const Eigen::MatrixXd &f = sampler.z_factor().factor;
    const Eigen::Index rank = f.cols();
    const auto &sidx = sampler.support_index();
    const Eigen::VectorXd &mu = sampler.mu();
    const auto sizes = chunk_sizes(static_cast<std::size_t>(n));
    return run_chunks<TiltedChunk>(sizes.size(), worker_count(threads), [&](std::size_t chunk) {
        std::mt19937_64 rng(stream_seed(seed, chunk));
        std::normal_distribution<double> normal;
        const auto b = static_cast<Eigen::Index>(sizes[chunk]);
        Eigen::MatrixXd xi_s(k, b);
        Eigen::MatrixXd xi_z(rank, b);
        for (Eigen::Index j = 0; j < b; ++j) {
            for (Eigen::Index i = 0; i < k; ++i) { xi_s(i, j) = normal(rng); }
            for (Eigen::Index i = 0; i < rank; ++i) { xi_z(i, j) = normal(rng); }
        }
        Eigen::MatrixXd xs = lower * xi_s;
        xs.array() += shift;
        Eigen::MatrixXd paths = a * xs;
        if (rank > 0) { paths.noalias() += f * xi_z; }
        TiltedChunk out;
        out.fl_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
        out.fl_sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
        for (Eigen::Index j = 0; j < b; ++j) {
            Eigen::Index arg = 0;
            const double mn = paths.col(j).minCoeff(&arg);  // first occurrence: leftmost
            if (!(mn > u)) { continue; }
            const double lr = std::exp(sampler.log_likelihood_ratio(shift, xs.col(j)));
            out.sum_y += lr;
            out.sum_y2 += lr * lr;
            ++out.accepted;
            AcceptedSample s;
            s.lr = lr;
            s.overshoot = u * (mn - u);
            s.argmin = static_cast<std::size_t>(arg);
            s.atom_overshoot.resize(sidx.size());
            for (std::size_t q = 0; q < sidx.size(); ++q) {
                s.atom_overshoot[q] = u * (paths(static_cast<Eigen::Index>(sidx[q]), j) - u);
            }
            out.samples.push_back(std::move(s));
            const Eigen::VectorXd fl = paths.col(j) - u * mu;
            out.fl_sum += lr * fl;
            out.fl_sq += lr * fl.cwiseAbs2();
        }
        return out;
    });
}

inline double weighted_ks_exponential(std::vector<std::pair<double, double>> values_weights, double mean) {
    if (values_weights.empty()) { return 1.0; }
    std::sort(values_weights.begin(), values_weights.end());
    double total = 0.0;
    for (const auto &vw : values_weights) { total += vw.second; }
    double cum = 0.0;
    double d = 0.0;
    for (const auto &[x, w] : values_weights) {
        const double cdf = x <= 0.0 ? 0.0 : 1.0 - std::exp(-x / mean);
        d = std::max(d, std::abs(cum - cdf));
        cum += w / total;
        d = std::max(d, std::abs(cum - cdf));
    }
    return d;
}

}  // namespace detail

inline ConditionalEnsemble conditional_samples(const Kernel &kernel, const PathGrid &grid,
                                               const AsymptoticReport &report, double u, const MCOptions &opts) {
    if (!report.nondegenerate) { throw DegenerateConfiguration("conditional sampling needs a nondegenerate configuration"); }
    detail::require(opts.n > 0, "sample count must be positive");
    const TiltedSampler sampler(kernel, grid, report);
    auto chunks = detail::tilted_run(sampler, grid.size(), u, opts.n, opts.seed, opts.threads);
    ConditionalEnsemble out;
    out.u = u;
    out.n = opts.n;
    const auto m = static_cast<Eigen::Index>(grid.size());
    Eigen::VectorXd fl_sum = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd fl_sq = Eigen::VectorXd::Zero(m);
    double total = 0.0;
    double total_sq = 0.0;
    for (auto &c : chunks) {
        fl_sum += c.fl_sum;
        fl_sq += c.fl_sq;
        total += c.sum_y;
        total_sq += c.sum_y2;
        for (auto &s : c.samples) { out.samples.push_back(std::move(s)); }
    }
    out.weights.reserve(out.samples.size());
    for (const auto &s : out.samples) { out.weights.push_back(total > 0.0 ? s.lr / total : 0.0); }
    out.ess = total_sq > 0.0 ? total * total / total_sq : 0.0;
    if (total > 0.0) {
        out.fluctuation_mean = fl_sum / total;
        out.fluctuation_var = (fl_sq / total - out.fluctuation_mean.cwiseAbs2()).cwiseMax(0.0);
    } else {
        out.fluctuation_mean = Eigen::VectorXd::Zero(m);
        out.fluctuation_var = Eigen::VectorXd::Zero(m);
    }
    out.warning.low_ess = out.ess < 100.0;
    out.warning.low_accepted = out.ess < 500.0;
    return out;
}

/// Importance-sampling estimate of P(min over the grid > u) with the conditional-law statistics.
inline MCReport is_estimate(const Kernel &kernel, const PathGrid &grid, const AsymptoticReport &report, double u,
                            const MCOptions &opts) {
    const ConditionalEnsemble ens = conditional_samples(kernel, grid, report, u, opts);
    MCReport r;
    r.u = u;
    r.n = opts.n;
    r.seed = opts.seed;
    r.grid_m = static_cast<int>(grid.size());
    r.jitter = grid.factor.jitter;
    r.accepted = static_cast<long>(ens.samples.size());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto &s : ens.samples) {
        sum += s.lr;
        sum_sq += s.lr * s.lr;
    }
    const auto n = static_cast<double>(opts.n);
    r.p_hat = sum / n;
    const double var = n > 1.0 ? std::max(0.0, sum_sq / n - r.p_hat * r.p_hat) * n / (n - 1.0) : 0.0;
    const double half = 1.96 * std::sqrt(var / n);
    r.ci_lo = std::max(0.0, r.p_hat - half);
    r.ci_hi = r.p_hat + half;
    r.ess = ens.ess;
    r.warning = ens.warning;
    if (u > 0.0) {
        r.formula_value = report.tail(u).value;
        r.ratio = r.p_hat / r.formula_value;
    }

    std::vector<std::pair<double, double>> ov;
    ov.reserve(ens.samples.size());
    for (std::size_t i = 0; i < ens.samples.size(); ++i) {
        ov.emplace_back(ens.samples[i].overshoot, ens.weights[i]);
        r.overshoot.mean += ens.weights[i] * ens.samples[i].overshoot;
    }
    r.overshoot.ks = detail::weighted_ks_exponential(std::move(ov), report.v_star);

    // argmin histogram over atoms
    const double radius = opts.window_factor * grid.spacing;
    r.argmin.atoms = report.support;
    r.argmin.frequencies.assign(report.support.size(), 0.0);
    for (std::size_t i = 0; i < ens.samples.size(); ++i) {
        const double t = grid.points[ens.samples[i].argmin];
        std::size_t best = 0;
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < report.support.size(); ++j) {
            const double d = std::abs(t - report.support[j]);
            if (d < dist) {
                dist = d;
                best = j;
            }
        }
        if (dist <= radius * (1.0 + 1e-12)) {
            r.argmin.frequencies[best] += ens.weights[i];
        } else {
            r.argmin.off_atom += ens.weights[i];
        }
    }

    // per-atom scaled values vs independent Exp(theta_j)
    const std::size_t k = report.support.size();
    std::vector<double> means(k, 0.0);
    for (std::size_t i = 0; i < ens.samples.size(); ++i) {
        for (std::size_t j = 0; j < k; ++j) { means[j] += ens.weights[i] * ens.samples[i].atom_overshoot[j]; }
    }
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<std::pair<double, double>> vw;
        vw.reserve(ens.samples.size());
        for (std::size_t i = 0; i < ens.samples.size(); ++i) {
            vw.emplace_back(ens.samples[i].atom_overshoot[j], ens.weights[i]);
        }
        r.atom_overshoot.push_back({means[j], detail::weighted_ks_exponential(std::move(vw), 1.0 / report.theta(static_cast<Eigen::Index>(j)))});
    }
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t q = p + 1; q < k; ++q) {
            double cpq = 0.0;
            double vp = 0.0;
            double vq = 0.0;
            for (std::size_t i = 0; i < ens.samples.size(); ++i) {
                const double dp = ens.samples[i].atom_overshoot[p] - means[p];
                const double dq = ens.samples[i].atom_overshoot[q] - means[q];
                cpq += ens.weights[i] * dp * dq;
                vp += ens.weights[i] * dp * dp;
                vq += ens.weights[i] * dq * dq;
            }
            if (vp > 0.0 && vq > 0.0) {
                r.max_atom_correlation = std::max(r.max_atom_correlation, std::abs(cpq / std::sqrt(vp * vq)));
            }
        }
    }
    return r;
}

/// Reference ensemble for the limit of the fluctuations X - u mu: residual paths Z weighted by W.
struct QwEnsemble {
    Eigen::VectorXd weighted_mean;  // E[Z W] / E[W] on the grid
    Eigen::VectorXd weighted_var;
    Eigen::VectorXd plain_mean;  // E[Z]
    double mean_w = 0.0;
    double ci_half_width = 0.0;
    double ess = 0.0;
    long n = 0;
};

inline QwEnsemble qw_reference_sample(const Kernel &kernel, const PathGrid &grid, const AsymptoticReport &report,
                                      long n, std::uint64_t seed, int threads = 0) {
    if (!report.nondegenerate) { throw DegenerateConfiguration("Q_W needs a nondegenerate configuration"); }
    detail::require(n > 1, "qw_reference_sample needs n > 1");
    const ConditionalProjection proj(kernel, report.support);
    std::vector<GramPoint> fns;
    for (double t : grid.points) { fns.push_back({t, 0}); }
    const auto m = static_cast<Eigen::Index>(grid.size());
    const auto comps = report.field.functionals();
    fns.insert(fns.end(), comps.begin(), comps.end());
    Eigen::MatrixXd cov = proj.residual_covariance(fns);
    std::vector<Eigen::Index> zero_rows;
    for (double s : report.support) {
        const auto idx = static_cast<Eigen::Index>(grid.index_of(s));
        zero_rows.push_back(idx);
        cov.row(idx).setZero();
        cov.col(idx).setZero();
    }
    LowRankFactor fac = pivoted_cholesky(cov);
    for (auto idx : zero_rows) { fac.factor.row(idx).setZero(); }
    const Eigen::Index rank = fac.rank();
    const auto c = static_cast<Eigen::Index>(comps.size());

    struct Partial {
        Eigen::VectorXd wz, wz2, z;
        double sw = 0.0, sw2 = 0.0;
    };
    const auto sizes = chunk_sizes(static_cast<std::size_t>(n));
    const auto parts = run_chunks<Partial>(sizes.size(), worker_count(threads), [&](std::size_t chunk) {
        std::mt19937_64 rng(stream_seed(seed, chunk));
        std::normal_distribution<double> normal;
        const auto b = static_cast<Eigen::Index>(sizes[chunk]);
        Eigen::MatrixXd xi(rank, b);
        for (Eigen::Index j = 0; j < b; ++j) {
            for (Eigen::Index i = 0; i < rank; ++i) { xi(i, j) = normal(rng); }
        }
        const Eigen::MatrixXd z = fac.factor * xi;
        Partial p;
        p.wz = Eigen::VectorXd::Zero(m);
        p.wz2 = Eigen::VectorXd::Zero(m);
        p.z = Eigen::VectorXd::Zero(m);
        std::vector<double> vals(static_cast<std::size_t>(c));
        for (Eigen::Index j = 0; j < b; ++j) {
            for (Eigen::Index i = 0; i < c; ++i) { vals[static_cast<std::size_t>(i)] = z(m + i, j); }
            const double w = w_value(report.field.components, vals.data());
            const auto path = z.col(j).head(m);
            p.z += path;
            p.wz += w * path;
            p.wz2 += w * path.cwiseAbs2();
            p.sw += w;
            p.sw2 += w * w;
        }
        return p;
    });
    QwEnsemble out;
    out.n = n;
    Eigen::VectorXd wz = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd wz2 = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
    double sw = 0.0;
    double sw2 = 0.0;
    for (const auto &p : parts) {
        wz += p.wz;
        wz2 += p.wz2;
        z += p.z;
        sw += p.sw;
        sw2 += p.sw2;
    }
    const auto nn = static_cast<double>(n);
    out.mean_w = sw / nn;
    out.ci_half_width = 1.96 * std::sqrt(std::max(0.0, sw2 / nn - out.mean_w * out.mean_w) / (nn - 1.0));
    out.ess = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
    out.plain_mean = z / nn;
    if (sw > 0.0) {
        out.weighted_mean = wz / sw;
        out.weighted_var = (wz2 / sw - out.weighted_mean.cwiseAbs2()).cwiseMax(0.0);
    } else {
        out.weighted_mean = Eigen::VectorXd::Zero(m);
        out.weighted_var = Eigen::VectorXd::Zero(m);
    }
    return out;
}

}  // namespace gpmin
