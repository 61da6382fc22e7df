#pragma once

// Leading-order asymptotics of P(min_{[a,b]} X > u) from the optimal measure:
//
//   P(min X > u) ~ E(W) (2 pi)^{-k/2} (theta_1...theta_k)^{-1} det(Sigma)^{-1/2} u^{-k} exp(-u^2 / (2 V*))
//
// with theta = Sigma^{-1} 1 on the support S = {t_1..t_k}, and W a functional of the
// residual process Z = X - E(X | X_S) at the support and the extra essential points.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "gpmin/errors.hpp"
#include "gpmin/gram.hpp"
#include "gpmin/kernels.hpp"
#include "gpmin/measure_solver.hpp"
#include "gpmin/parallel.hpp"
#include "gpmin/residual.hpp"

namespace gpmin {

struct AsymptoticOptions {
    double deriv_tol = 1e-7;      // relative to the local derivative scale
    double essential_tol = 1e-8;  // mu(t) <= 1 + tol marks an essential point
    int scan_grid_n = 4001;
    int max_multiplicity = 4;  // higher first-nonvanishing orders are flagged
    long mc_n = 1000000;
    std::uint64_t seed = 20240601;
    int threads = 0;
};

/// theta = Sigma^{-1} 1; every component must be positive for a genuine optimal support.
inline Eigen::VectorXd compute_theta(const Eigen::MatrixXd &sigma) {
    detail::require(sigma.rows() > 0 && sigma.rows() == sigma.cols(), "sigma must be square and nonempty");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) { throw InvalidArgument("sigma is not positive definite"); }
    Eigen::VectorXd theta = llt.solve(Eigen::VectorXd::Ones(sigma.rows()));
    if (!theta.allFinite()) { throw InvalidArgument("sigma is singular"); }
    if ((theta.array() <= 0.0).any()) {
        throw InvalidArgument("theta has a nonpositive component: the support is not optimal");
    }
    return theta;
}

/// mu(t) = E(X_t | X_s = 1 for s in S) = theta' r(t), with derivatives from the kernel.
class MuFunction {
public:
    MuFunction(Kernel kernel, std::vector<double> support, const Eigen::MatrixXd &sigma)
        : kernel_(std::move(kernel)), support_(std::move(support)), theta_(compute_theta(sigma)) {
        detail::require(static_cast<Eigen::Index>(support_.size()) == sigma.rows(), "support/sigma size mismatch");
    }

    MuFunction(const Kernel &kernel, const OptimalSolution &sol) : MuFunction(kernel, sol.measure.atoms, sol.sigma) {}

    [[nodiscard]] double operator()(double t, int order = 0) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < support_.size(); ++i) {
            sum += theta_(static_cast<Eigen::Index>(i)) * kernel_.deriv(t, support_[i], order, 0);
        }
        return sum;
    }

    /// Cauchy-Schwarz bound on |mu^(order)(t)|, the yardstick for "vanishing" derivatives.
    [[nodiscard]] double scale(double t, int order) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < support_.size(); ++i) {
            sum += std::abs(theta_(static_cast<Eigen::Index>(i))) *
                   std::sqrt(std::max(0.0, kernel_.eval(support_[i], support_[i])));
        }
        return sum * std::sqrt(std::max(0.0, kernel_.deriv(t, t, order, order)));
    }

    [[nodiscard]] const Eigen::VectorXd &theta() const { return theta_; }
    [[nodiscard]] const std::vector<double> &support() const { return support_; }
    [[nodiscard]] const Kernel &kernel() const { return kernel_; }

private:
    Kernel kernel_;
    std::vector<double> support_;
    Eigen::VectorXd theta_;
};

inline double mu_eval(const MuFunction &mu, double t, int order) {
    detail::require(order >= 0 && order <= 2, "mu_eval supports orders 0..2");
    return mu(t, order);
}

enum class EssentialKind { InteriorSupport, EndpointSupport, EssentialNonSupport };

inline const char *to_string(EssentialKind k) {
    switch (k) {
        case EssentialKind::InteriorSupport: return "interior-support";
        case EssentialKind::EndpointSupport: return "endpoint-support";
        default: return "essential-nonsupport";
    }
}

struct EssentialPoint {
    double t = 0.0;
    EssentialKind kind = EssentialKind::EssentialNonSupport;
    int support_index = -1;
    double mu = 1.0;
    double d1 = 0.0;          // mu'(t)
    double d2 = 0.0;          // mu''(t)
    bool flat_slope = false;  // |mu'(t)| below deriv_tol: derivative residual enters W
    bool flat_curvature = false;
    int order = 0;  // first nonvanishing derivative order (0 if none up to kMaxDerivOrder / 2)
};

struct EssentialSet {
    std::vector<EssentialPoint> points;  // support points first (ascending), then E \ S (ascending)
    std::size_t support_size = 0;
    bool suspicious_multiplicity = false;

    [[nodiscard]] std::vector<double> locations() const {
        std::vector<double> out;
        for (const auto &p : points) { out.push_back(p.t); }
        return out;
    }
};

namespace detail {

inline int first_nonvanishing(const MuFunction &mu, double t, double tol, int max_order) {
    for (int j = 1; j <= max_order; ++j) {
        if (std::abs(mu(t, j)) > tol * mu.scale(t, j)) { return j; }
    }
    return 0;
}

inline EssentialPoint classify(const MuFunction &mu, const Interval &iv, double t, int support_index,
                               const AsymptoticOptions &opts) {
    EssentialPoint p;
    p.t = t;
    p.support_index = support_index;
    if (support_index < 0) {
        p.kind = EssentialKind::EssentialNonSupport;
    } else if (t == iv.a || t == iv.b) {
        p.kind = EssentialKind::EndpointSupport;
    } else {
        p.kind = EssentialKind::InteriorSupport;
    }
    p.mu = mu(t, 0);
    p.d1 = mu(t, 1);
    p.d2 = mu(t, 2);
    p.flat_slope = std::abs(p.d1) <= opts.deriv_tol * mu.scale(t, 1);
    p.flat_curvature = p.d2 <= opts.deriv_tol * mu.scale(t, 2);
    p.order = first_nonvanishing(mu, t, opts.deriv_tol, kMaxDerivOrder / 2);
    return p;
}

}  // namespace detail

/// E = {t in [a,b] : mu(t) = 1}.  Since mu >= 1 on [a,b], its roots are tangential, so they are
/// searched among the local minima of mu on a fine grid and polished by Brent/Newton.
inline EssentialSet essential_set(const MuFunction &mu, const Interval &iv, const OptimalSolution &sol,
                                  const AsymptoticOptions &opts = {}) {
    detail::require(sol.converged && !sol.degenerate_flat, "essential_set needs a converged, finite-support solution");
    EssentialSet out;
    const auto &support = sol.measure.atoms;
    out.support_size = support.size();
    for (std::size_t j = 0; j < support.size(); ++j) {
        out.points.push_back(detail::classify(mu, iv, support[j], static_cast<int>(j), opts));
    }
    if (!iv.degenerate()) {
        const auto grid = uniform_grid(iv, opts.scan_grid_n);
        std::vector<double> values(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) { values[i] = mu(grid[i], 0); }
        const double snap = 1e-6 * iv.length();
        std::vector<double> extra;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const bool left_ok = i == 0 || values[i] <= values[i - 1];
            const bool right_ok = i + 1 == grid.size() || values[i] <= values[i + 1];
            if (!left_ok || !right_ok || values[i] > 1.0 + 1e-4) { continue; }
            double t = grid[i];
            double best = values[i];
            if (i > 0 && i + 1 < grid.size()) {
                auto f = [&](double x) { return mu(x, 0); };
                const auto r = boost::math::tools::brent_find_minima(f, grid[i - 1], grid[i + 1], 52);
                if (r.second <= best) {
                    t = r.first;
                    best = r.second;
                }
                // Newton polish on mu' = 0 inside the bracket
                for (int it = 0; it < 20; ++it) {
                    const double d2 = mu(t, 2);
                    if (!(d2 > 0.0)) { break; }
                    const double next = t - mu(t, 1) / d2;
                    if (next < grid[i - 1] || next > grid[i + 1]) { break; }
                    const double v = mu(next, 0);
                    if (v > best) { break; }
                    const bool done = std::abs(next - t) <= 1e-15 * std::max(1.0, std::abs(t));
                    t = next;
                    best = v;
                    if (done) { break; }
                }
            }
            if (best > 1.0 + opts.essential_tol) { continue; }
            // a point joined to a known one by a segment on which mu stays at level 1 is the same point
            auto joined = [&](double other) {
                if (std::abs(other - t) <= snap) { return true; }
                if (std::abs(other - t) > 2.0 * iv.length() / (opts.scan_grid_n - 1)) { return false; }
                for (int q = 1; q < 32; ++q) {
                    if (mu(t + (other - t) * q / 32.0, 0) > 1.0 + opts.essential_tol) { return false; }
                }
                return true;
            };
            bool seen = false;
            for (double s : support) { seen = seen || joined(s); }
            for (double e : extra) { seen = seen || joined(e); }
            if (!seen) { extra.push_back(t); }
        }
        std::sort(extra.begin(), extra.end());
        for (double t : extra) { out.points.push_back(detail::classify(mu, iv, t, -1, opts)); }
    }
    for (const auto &p : out.points) {
        if (p.kind != EssentialKind::EndpointSupport && (p.order == 0 || p.order > opts.max_multiplicity)) {
            out.suspicious_multiplicity = true;
        }
    }
    return out;
}

/// True iff mu'' > 0 at every interior support point.
inline bool nondegeneracy_check(const EssentialSet &e) {
    for (const auto &p : e.points) {
        if (p.kind == EssentialKind::InteriorSupport && p.flat_curvature) { return false; }
    }
    return true;
}

enum class ComponentKind {
    InteriorSlope,  // exp(-lambda Z'^2)
    LeftSlope,      // 1(Z' > 0) + exp(-lambda Z'^2) 1(Z' < 0)
    RightSlope,     // 1(Z' < 0) + exp(-lambda Z'^2) 1(Z' > 0)
    Level           // 1(Z > 0)
};

inline const char *to_string(ComponentKind k) {
    switch (k) {
        case ComponentKind::InteriorSlope: return "interior-slope";
        case ComponentKind::LeftSlope: return "left-slope";
        case ComponentKind::RightSlope: return "right-slope";
        default: return "level";
    }
}

struct ResidualComponent {
    ComponentKind kind = ComponentKind::Level;
    double t = 0.0;
    int order = 0;  // 1 for Z', 0 for Z
    double lambda = 0.0;  // theta_j / (2 mu''(t_j)); +inf when mu''(t_j) = 0
};

/// Centered Gaussian vector of the residual values that enter W.
struct ResidualField {
    std::vector<ResidualComponent> components;
    Eigen::MatrixXd covariance;

    [[nodiscard]] bool empty() const { return components.empty(); }
    [[nodiscard]] std::vector<GramPoint> functionals() const {
        std::vector<GramPoint> out;
        for (const auto &c : components) { out.push_back({c.t, c.order}); }
        return out;
    }
};

inline ResidualField residual_field(const Kernel &kernel, const OptimalSolution &sol, const EssentialSet &e) {
    ResidualField field;
    const auto &theta = sol.theta;
    const Interval &iv = sol.interval;
    if (!iv.degenerate()) {
        for (const auto &p : e.points) {
            const double curvature_lambda = p.flat_curvature || !(p.d2 > 0.0)
                                                ? std::numeric_limits<double>::infinity()
                                                : theta(p.support_index < 0 ? 0 : p.support_index) / (2.0 * p.d2);
            if (p.kind == EssentialKind::InteriorSupport) {
                field.components.push_back({ComponentKind::InteriorSlope, p.t, 1, curvature_lambda});
            } else if (p.kind == EssentialKind::EndpointSupport && p.flat_slope) {
                const auto kind = p.t == iv.a ? ComponentKind::LeftSlope : ComponentKind::RightSlope;
                field.components.push_back({kind, p.t, 1, curvature_lambda});
            } else if (p.kind == EssentialKind::EssentialNonSupport) {
                field.components.push_back({ComponentKind::Level, p.t, 0, 0.0});
            }
        }
    }
    if (field.components.empty()) { return field; }
    const ConditionalProjection proj(kernel, sol.measure.atoms);
    const auto fns = field.functionals();
    field.covariance = proj.residual_covariance(fns);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(field.covariance);
    const double top = std::max(1.0, eig.eigenvalues().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-10 * top) {
        throw Error("residual covariance is not positive semidefinite beyond repair tolerance");
    }
    for (Eigen::Index i = 0; i < field.covariance.rows(); ++i) {
        if (!(field.covariance(i, i) > 0.0)) { throw Error("residual component has zero variance"); }
    }
    return field;
}

/// W evaluated at one realization of the residual components.
inline double w_value(const std::vector<ResidualComponent> &components, const double *z) {
    double w = 1.0;
    for (std::size_t i = 0; i < components.size() && w > 0.0; ++i) {
        const auto &c = components[i];
        const double x = z[i];
        auto damp = [&] { return std::isinf(c.lambda) ? (x == 0.0 ? 1.0 : 0.0) : std::exp(-c.lambda * x * x); };
        switch (c.kind) {
            case ComponentKind::InteriorSlope: w *= damp(); break;
            case ComponentKind::LeftSlope: w *= x >= 0.0 ? 1.0 : damp(); break;
            case ComponentKind::RightSlope: w *= x <= 0.0 ? 1.0 : damp(); break;
            case ComponentKind::Level: w *= x > 0.0 ? 1.0 : 0.0; break;
        }
    }
    return w;
}

struct ExpectedW {
    double mean = 0.0;
    double ci_half_width = 0.0;  // 95% normal approximation; zero for closed forms
    long samples = 0;
    bool closed_form = false;
};

namespace detail {

// symmetric PSD square root factor F with F F' = C
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd &c) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace detail

/// E(W): exact for the empty field and for a single component, Monte Carlo otherwise
/// (or always, with force_monte_carlo).
inline ExpectedW expected_w(const ResidualField &field, bool nondegenerate, long mc_n, std::uint64_t seed,
                            int threads = 0, bool force_monte_carlo = false) {
    ExpectedW out;
    if (!nondegenerate) {
        out.closed_form = true;
        return out;
    }
    detail::require(mc_n >= 10000, "expected_w needs mc_n >= 10^4");
    if (field.empty()) {
        out.mean = 1.0;
        out.closed_form = true;
        return out;
    }
    if (field.components.size() == 1 && !force_monte_carlo) {
        const auto &c = field.components.front();
        const double var = field.covariance(0, 0);
        const double gauss = std::isinf(c.lambda) ? 0.0 : 1.0 / std::sqrt(1.0 + 2.0 * c.lambda * var);
        switch (c.kind) {
            case ComponentKind::InteriorSlope: out.mean = gauss; break;
            case ComponentKind::LeftSlope:
            case ComponentKind::RightSlope: out.mean = 0.5 + 0.5 * gauss; break;
            case ComponentKind::Level: out.mean = 0.5; break;
        }
        out.closed_form = true;
        return out;
    }
    const Eigen::MatrixXd factor = detail::psd_factor(field.covariance);
    const auto dim = factor.rows();
    struct Partial {
        double sum = 0.0;
        double sum_sq = 0.0;
    };
    const auto sizes = chunk_sizes(static_cast<std::size_t>(mc_n));
    const auto parts = run_chunks<Partial>(sizes.size(), worker_count(threads), [&](std::size_t chunk) {
        std::mt19937_64 rng(stream_seed(seed, chunk));
        std::normal_distribution<double> normal;
        Eigen::VectorXd xi(dim);
        Eigen::VectorXd z(dim);
        Partial p;
        for (std::size_t s = 0; s < sizes[chunk]; ++s) {
            for (Eigen::Index i = 0; i < dim; ++i) { xi(i) = normal(rng); }
            z.noalias() = factor * xi;
            const double w = w_value(field.components, z.data());
            p.sum += w;
            p.sum_sq += w * w;
        }
        return p;
    });
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto &p : parts) {
        sum += p.sum;
        sum_sq += p.sum_sq;
    }
    const auto n = static_cast<double>(mc_n);
    out.mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - out.mean * out.mean) * n / (n - 1.0);
    out.ci_half_width = 1.96 * std::sqrt(var / n);
    out.samples = mc_n;
    return out;
}

/// Value of the leading-order tail, or an upper-bound-only marker when E(W) = 0.
struct TailEstimate {
    bool upper_bound_only = false;
    double value = std::numeric_limits<double>::quiet_NaN();
    int k = 0;
    double v_star = 0.0;

    [[nodiscard]] std::string describe() const {
        if (upper_bound_only) {
            return "degenerate: P = o(u^-" + std::to_string(k) + " exp(-u^2/2V*)), V* = " + std::to_string(v_star);
        }
        return std::to_string(value);
    }
};

struct AsymptoticReport {
    Interval interval;
    std::vector<double> support;
    std::vector<double> weights;
    Eigen::VectorXd theta;
    Eigen::MatrixXd sigma;
    double v_star = 0.0;
    double det_sigma = 0.0;
    double c_const = 0.0;  // (2 pi)^{-k/2} det(Sigma)^{-1/2}
    int k = 0;
    bool nondegenerate = false;
    ExpectedW expected_w;
    EssentialSet essential;
    ResidualField field;

    /// E(W) c / (theta_1 ... theta_k)
    [[nodiscard]] double leading_constant() const { return expected_w.mean * c_const / theta.prod(); }

    [[nodiscard]] TailEstimate tail(double u) const {
        TailEstimate out;
        out.k = k;
        out.v_star = v_star;
        if (!nondegenerate) {
            out.upper_bound_only = true;
            return out;
        }
        detail::require(u > 0.0, "tail probability needs u > 0");
        out.value = leading_constant() * std::pow(u, -k) * std::exp(-u * u / (2.0 * v_star));
        return out;
    }
};

inline TailEstimate tail_probability(const AsymptoticReport &report, double u) { return report.tail(u); }

/// c (theta_1...theta_k)^{-1} exp(-sum theta_i h_i) u^{-k} exp(-u^2 sum(theta) / 2): the leading
/// term of P(X_{t_i} > u + h_i/u for all i).
inline double finite_dim_tail(const Eigen::VectorXd &theta, const Eigen::MatrixXd &sigma, double u,
                              const Eigen::VectorXd &shifts) {
    detail::require(u > 0.0, "finite_dim_tail needs u > 0");
    detail::require(theta.size() == sigma.rows() && shifts.size() == theta.size(), "dimension mismatch");
    const auto k = static_cast<double>(theta.size());
    const double det = sigma.determinant();
    const double c = std::pow(2.0 * std::numbers::pi, -0.5 * k) / std::sqrt(det);
    return c / theta.prod() * std::exp(-theta.dot(shifts)) * std::pow(u, -k) * std::exp(-0.5 * u * u * theta.sum());
}

inline double finite_dim_tail(const Eigen::VectorXd &theta, const Eigen::MatrixXd &sigma, double u) {
    return finite_dim_tail(theta, sigma, u, Eigen::VectorXd::Zero(theta.size()));
}

/// Every ingredient of the tail asymptotics for a solved configuration.
inline AsymptoticReport analyze(const Kernel &kernel, const OptimalSolution &sol, const AsymptoticOptions &opts = {}) {
    if (sol.degenerate_flat) { throw DegenerateSupport("optimal measure is not finitely supported"); }
    detail::require(sol.converged, "analyze needs a converged solution");
    AsymptoticReport r;
    r.interval = sol.interval;
    r.support = sol.measure.atoms;
    r.weights = sol.measure.weights;
    r.sigma = sol.sigma;
    r.theta = compute_theta(sol.sigma);
    r.k = static_cast<int>(r.support.size());
    r.v_star = sol.v_star;
    r.det_sigma = sol.sigma.determinant();
    r.c_const = std::pow(2.0 * std::numbers::pi, -0.5 * r.k) / std::sqrt(r.det_sigma);
    const MuFunction mu(kernel, sol);
    r.essential = essential_set(mu, sol.interval, sol, opts);
    r.nondegenerate = nondegeneracy_check(r.essential);
    r.field = residual_field(kernel, sol, r.essential);
    r.expected_w = expected_w(r.field, r.nondegenerate, opts.mc_n, opts.seed, opts.threads);
    return r;
}

struct LimitLaws {
    double overshoot_mean = 0.0;          // mean of the limiting exponential overshoot
    Eigen::VectorXd argmin_weights;       // limiting law of the leftmost argmin on S
    Eigen::VectorXd finite_min_rates;     // rates of the independent exponentials at the atoms
};

inline LimitLaws limit_laws(const AsymptoticReport &report) {
    if (!report.nondegenerate) { throw DegenerateConfiguration("limit laws need the nondegeneracy condition"); }
    LimitLaws out;
    out.overshoot_mean = report.v_star;
    out.argmin_weights = report.theta / report.theta.sum();
    out.finite_min_rates = report.theta;
    return out;
}

}  // namespace gpmin
