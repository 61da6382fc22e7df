#pragma once

// Minimization of the energy  int int R(s,t) nu(ds) nu(dt)  over probability
// measures on [a,b].  A simplex-constrained QP on a uniform grid gives the
// support pattern; Newton iterations on the optimality system then place the
// atoms exactly, and the certificate mu_hat >= 1 on [a,b] is checked on a fine grid.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "gpmin/errors.hpp"
#include "gpmin/gram.hpp"
#include "gpmin/kernels.hpp"

namespace gpmin {

struct AtomicMeasure {
    std::vector<double> atoms;    // strictly increasing
    std::vector<double> weights;  // positive, summing to one

    [[nodiscard]] std::size_t size() const { return atoms.size(); }

    void validate(const Interval &interval) const {
        detail::require(!atoms.empty() && atoms.size() == weights.size(), "atomic measure needs matching atoms/weights");
        double total = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            detail::require(interval.contains(atoms[i]), "atom outside the interval");
            detail::require(weights[i] > 0.0, "atom weights must be positive");
            if (i > 0) { detail::require(atoms[i] > atoms[i - 1], "atoms must be strictly increasing"); }
            total += weights[i];
        }
        detail::require(std::abs(total - 1.0) <= 1e-12, "atom weights must sum to one");
    }
};

struct SolverOptions {
    int grid_n = 401;
    double merge_radius = -1.0;  // <= 0 selects two grid spacings
    double mass_floor = 1e-6;
    int max_atoms = 12;
    int max_cluster_nodes = 8;
    int verify_grid_n = 4001;
    double kkt_tolerance = 1e-8;
    double gap_tolerance = 1e-10;
    int max_qp_iterations = 20000;
    double newton_tolerance = 1e-12;
    int max_newton_iterations = 100;
    int max_restarts = 20;
    int max_exchange_rounds = 10;
    double flat_tolerance = 1e-6;
    double flat_fraction = 0.05;
};

struct OptimalSolution {
    Interval interval;
    AtomicMeasure measure;
    double v_star = 0.0;
    Eigen::MatrixXd sigma;  // Gram matrix on the support
    Eigen::VectorXd theta;  // sigma^{-1} 1
    double kkt_min = 0.0;
    int kkt_grid_n = 0;
    double newton_residual = 0.0;
    int newton_iterations = 0;
    bool converged = false;
    bool degenerate_flat = false;
    std::string message;
};

struct SimplexQpResult {
    Eigen::VectorXd weights;
    double objective = 0.0;
    double gap = 0.0;  // Frank-Wolfe duality gap 2 (w'Gw - min_i (Gw)_i)
    int iterations = 0;
    bool converged = false;
};

struct GridSolution {
    std::vector<double> grid;
    std::vector<double> weights;
    double objective = 0.0;
    double gap = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline double qp_gap(const Eigen::MatrixXd &g, const Eigen::VectorXd &w, double *objective) {
    const Eigen::VectorXd grad = g * w;
    const double v = w.dot(grad);
    if (objective != nullptr) { *objective = v; }
    return 2.0 * (v - grad.minCoeff());
}

}  // namespace detail

/// min w'Gw over the probability simplex, G symmetric PSD.
///
/// Minimum-norm-point active-set iterations (each major step adds the most
/// violated vertex, minor steps solve the affine subproblem on the active set
/// and retreat toward feasibility).  Every accepted step is a descent step; if the
/// affine solve loses accuracy the step falls back to a pairwise conditional-gradient move.
inline SimplexQpResult solve_simplex_qp(const Eigen::MatrixXd &g, double gap_tol = 1e-10, int max_iter = 20000) {
    const Eigen::Index n = g.rows();
    detail::require(n > 0 && g.cols() == n, "QP matrix must be square and nonempty");

    SimplexQpResult out;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    Eigen::Index start = 0;
    g.diagonal().minCoeff(&start);
    w(start) = 1.0;
    std::vector<Eigen::Index> active{start};

    auto objective = [&](const Eigen::VectorXd &x) {
        double v = 0.0;
        for (Eigen::Index i : active) {
            for (Eigen::Index j : active) { v += x(i) * g(i, j) * x(j); }
        }
        return v;
    };

    auto pairwise_step = [&](const Eigen::VectorXd &grad, Eigen::Index toward) {
        Eigen::Index away = active.front();
        for (Eigen::Index i : active) {
            if (grad(i) > grad(away)) { away = i; }
        }
        if (away == toward) { return false; }
        const double curvature = g(toward, toward) + g(away, away) - 2.0 * g(toward, away);
        const double slope = grad(away) - grad(toward);
        if (slope <= 0.0) { return false; }
        double step = curvature > 0.0 ? slope / curvature : w(away);
        step = std::min(step, w(away));
        w(toward) += step;
        w(away) -= step;
        if (std::find(active.begin(), active.end(), toward) == active.end()) { active.push_back(toward); }
        if (w(away) <= 0.0) {
            w(away) = 0.0;
            active.erase(std::find(active.begin(), active.end(), away));
        }
        return true;
    };

    for (int iter = 0; iter < max_iter; ++iter) {
        out.iterations = iter + 1;
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i : active) { grad += g.col(i) * w(i); }
        double v = 0.0;
        for (Eigen::Index i : active) { v += w(i) * grad(i); }
        Eigen::Index entering = 0;
        const double gmin = grad.minCoeff(&entering);
        out.gap = 2.0 * (v - gmin);
        if (out.gap <= gap_tol) {
            out.converged = true;
            break;
        }
        const bool already_active = std::find(active.begin(), active.end(), entering) != active.end();
        if (already_active) {
            if (!pairwise_step(grad, entering)) { break; }
            continue;
        }

        const Eigen::VectorXd w_before = w;
        const std::vector<Eigen::Index> active_before = active;
        active.push_back(entering);
        bool ok = true;
        for (int minor = 0; minor < 4 * static_cast<int>(active.size()) + 10; ++minor) {
            const auto k = static_cast<Eigen::Index>(active.size());
            Eigen::MatrixXd border(k + 1, k + 1);
            for (Eigen::Index i = 0; i < k; ++i) {
                for (Eigen::Index j = 0; j < k; ++j) { border(i, j) = g(active[i], active[j]); }
                border(i, k) = 1.0;
                border(k, i) = 1.0;
            }
            border(k, k) = 0.0;
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
            rhs(k) = 1.0;
            const Eigen::VectorXd sol = border.fullPivLu().solve(rhs);
            if (!sol.allFinite()) {
                ok = false;
                break;
            }
            const Eigen::VectorXd y = sol.head(k);
            if ((y.array() > 0.0).all()) {
                for (Eigen::Index i = 0; i < k; ++i) { w(active[i]) = y(i); }
                break;
            }
            double step = 1.0;
            for (Eigen::Index i = 0; i < k; ++i) {
                if (y(i) <= 0.0) {
                    const double wi = w(active[i]);
                    step = std::min(step, wi / (wi - y(i)));
                }
            }
            for (Eigen::Index i = 0; i < k; ++i) { w(active[i]) = (1.0 - step) * w(active[i]) + step * y(i); }
            std::vector<Eigen::Index> keep;
            for (Eigen::Index i = 0; i < k; ++i) {
                if (y(i) <= 0.0 && w(active[i]) <= 1e-15) {
                    w(active[i]) = 0.0;
                } else if (w(active[i]) > 0.0) {
                    keep.push_back(active[i]);
                } else {
                    w(active[i]) = 0.0;
                }
            }
            if (keep.size() == active.size()) {
                ok = false;
                break;
            }
            active = std::move(keep);
        }
        // renormalize against drift and insist on descent
        const double total = w.sum();
        if (ok && total > 0.0) { w /= total; }
        if (!ok || !(objective(w) <= v + 1e-15)) {
            w = w_before;
            active = active_before;
            if (!pairwise_step(grad, entering)) { break; }
        }
    }
    out.gap = detail::qp_gap(g, w, &out.objective);
    out.converged = out.gap <= gap_tol;
    out.weights = std::move(w);
    return out;
}

inline std::vector<double> uniform_grid(const Interval &interval, int n) {
    if (interval.degenerate()) { return {interval.a}; }
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        grid[static_cast<std::size_t>(i)] = interval.a + interval.length() * i / (n - 1);
    }
    grid.back() = interval.b;
    return grid;
}

/// Discretized energy minimization on a uniform grid of grid_n nodes.
inline GridSolution solve_grid(const Kernel &kernel, const Interval &interval, int grid_n, double gap_tol = 1e-10,
                               int max_iter = 20000) {
    detail::require(grid_n >= 2, "grid_n must be at least 2");
    GridSolution out;
    out.grid = uniform_grid(interval, grid_n);
    const Eigen::MatrixXd g = covariance_matrix(kernel, out.grid);
    const SimplexQpResult qp = solve_simplex_qp(g, gap_tol, max_iter);
    out.weights.assign(qp.weights.data(), qp.weights.data() + qp.weights.size());
    out.objective = qp.objective;
    out.gap = qp.gap;
    out.iterations = qp.iterations;
    out.converged = qp.converged;
    return out;
}

/// Merge contiguous clusters of grid mass into atoms at their mass-weighted centroids.
/// Throws DegenerateSupport when the mass is spread out (too many clusters or a wide cluster).
inline AtomicMeasure extract_atoms(const GridSolution &grid_sol, double merge_radius, double mass_floor,
                                   int max_atoms = 12, int max_cluster_nodes = 8) {
    const auto &grid = grid_sol.grid;
    const auto &w = grid_sol.weights;
    detail::require(!grid.empty() && grid.size() == w.size(), "grid solution is empty");
    if (grid.size() == 1 || grid.front() == grid.back()) { return AtomicMeasure{{grid.front()}, {1.0}}; }
    if (merge_radius <= 0.0) { merge_radius = 2.0 * (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1); }

    struct Cluster {
        double mass = 0.0;
        double moment = 0.0;
        int nodes = 0;
        double last = 0.0;
        bool touches_left = false;
        bool touches_right = false;
    };
    std::vector<Cluster> clusters;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(w[i] > mass_floor)) { continue; }
        if (clusters.empty() || grid[i] - clusters.back().last > merge_radius * (1.0 + 1e-9)) { clusters.emplace_back(); }
        auto &c = clusters.back();
        c.mass += w[i];
        c.moment += w[i] * grid[i];
        c.nodes += 1;
        c.last = grid[i];
        c.touches_left = c.touches_left || i == 0;
        c.touches_right = c.touches_right || i + 1 == grid.size();
    }
    if (clusters.empty()) { throw DegenerateSupport("no grid node carries mass above the floor"); }
    if (static_cast<int>(clusters.size()) > max_atoms) {
        throw DegenerateSupport("possible continuous-support minimizer: " + std::to_string(clusters.size()) +
                                " mass clusters");
    }
    AtomicMeasure out;
    double total = 0.0;
    for (const auto &c : clusters) {
        if (c.nodes > max_cluster_nodes) {
            throw DegenerateSupport("possible continuous-support minimizer: mass spread over " +
                                    std::to_string(c.nodes) + " adjacent nodes");
        }
        double at = c.moment / c.mass;
        if (c.touches_left) { at = grid.front(); }
        if (c.touches_right) { at = grid.back(); }
        if (!out.atoms.empty() && at <= out.atoms.back()) {
            out.weights.back() += c.mass;
        } else {
            out.atoms.push_back(at);
            out.weights.push_back(c.mass);
        }
        total += c.mass;
    }
    for (double &x : out.weights) { x /= total; }
    return out;
}

namespace detail {

struct SupportState {
    std::vector<double> atoms;
    Eigen::MatrixXd sigma;
    Eigen::VectorXd theta;
};

inline SupportState support_state(const Kernel &kernel, const std::vector<double> &atoms) {
    SupportState st;
    st.atoms = atoms;
    st.sigma = covariance_matrix(kernel, atoms);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(st.sigma);
    if (ldlt.info() != Eigen::Success) { throw ConvergenceError("Gram matrix on the support is singular"); }
    st.theta = ldlt.solve(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(atoms.size())));
    if (!st.theta.allFinite()) { throw ConvergenceError("Gram matrix on the support is singular"); }
    return st;
}

inline bool is_endpoint(const Interval &iv, double t) { return t == iv.a || t == iv.b; }

// mu_hat'(t_j) = sum_i theta_i d/ds R(s, t_i)|_{s=t_j} at each interior atom
inline Eigen::VectorXd stationarity_residual(const Kernel &kernel, const Interval &iv, const SupportState &st,
                                             const std::vector<int> &interior) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(interior.size()));
    for (std::size_t r = 0; r < interior.size(); ++r) {
        const double tj = st.atoms[static_cast<std::size_t>(interior[r])];
        double sum = 0.0;
        for (std::size_t i = 0; i < st.atoms.size(); ++i) {
            sum += st.theta(static_cast<Eigen::Index>(i)) * kernel.deriv(tj, st.atoms[i], 1, 0);
        }
        f(static_cast<Eigen::Index>(r)) = sum;
    }
    (void)iv;
    return f;
}

inline Eigen::MatrixXd stationarity_jacobian(const Kernel &kernel, const SupportState &st,
                                             const std::vector<int> &interior) {
    const auto k = static_cast<Eigen::Index>(st.atoms.size());
    const auto q = static_cast<Eigen::Index>(interior.size());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(st.sigma);
    Eigen::MatrixXd jac(q, q);
    for (Eigen::Index c = 0; c < q; ++c) {
        const int l = interior[static_cast<std::size_t>(c)];
        const double tl = st.atoms[static_cast<std::size_t>(l)];
        // (dSigma/dt_l) theta
        Eigen::VectorXd ds_theta(k);
        for (Eigen::Index p = 0; p < k; ++p) {
            const double tp = st.atoms[static_cast<std::size_t>(p)];
            double v = kernel.deriv(tp, tl, 0, 1) * st.theta(l);
            if (p == l) {
                for (Eigen::Index qq = 0; qq < k; ++qq) {
                    v += kernel.deriv(tl, st.atoms[static_cast<std::size_t>(qq)], 1, 0) * st.theta(qq);
                }
            }
            ds_theta(p) = v;
        }
        const Eigen::VectorXd dtheta = -ldlt.solve(ds_theta);
        for (Eigen::Index r = 0; r < q; ++r) {
            const int j = interior[static_cast<std::size_t>(r)];
            const double tj = st.atoms[static_cast<std::size_t>(j)];
            double v = 0.0;
            for (Eigen::Index i = 0; i < k; ++i) {
                v += dtheta(i) * kernel.deriv(tj, st.atoms[static_cast<std::size_t>(i)], 1, 0);
            }
            if (j == l) {
                for (Eigen::Index i = 0; i < k; ++i) {
                    v += st.theta(i) * kernel.deriv(tj, st.atoms[static_cast<std::size_t>(i)], 2, 0);
                }
            }
            v += st.theta(l) * kernel.deriv(tj, tl, 1, 1);
            jac(r, c) = v;
        }
    }
    return jac;
}

}  // namespace detail

/// Newton refinement of the optimality system: mu_hat(t_j) = 1 at every atom (built into
/// the weights theta / sum(theta)) and mu_hat'(t_j) = 0 at interior atoms.  Endpoint atoms stay
/// pinned.  Atoms with nonpositive weight are deleted, atoms leaving [a,b] are snapped to the
/// endpoint, and the iteration restarts.
inline OptimalSolution refine_support(const Kernel &kernel, const Interval &interval, const AtomicMeasure &initial,
                                      const SolverOptions &opts = {}) {
    detail::require(!initial.atoms.empty(), "refine_support needs at least one initial atom");
    std::vector<double> atoms = initial.atoms;
    std::sort(atoms.begin(), atoms.end());
    for (std::size_t i = 1; i < atoms.size(); ++i) {
        detail::require(atoms[i] > atoms[i - 1], "initial atoms must be distinct");
    }
    const double snap = 1e-9 * std::max(1.0, interval.length());
    const double collide = 1e-7 * std::max(1.0, interval.length());

    auto normalize_atoms = [&](std::vector<double> &xs) {
        for (double &t : xs) {
            if (t <= interval.a + snap) { t = interval.a; }
            if (t >= interval.b - snap) { t = interval.b; }
        }
        std::sort(xs.begin(), xs.end());
        std::vector<double> merged;
        for (double t : xs) {
            if (merged.empty() || t - merged.back() > collide) {
                merged.push_back(t);
            } else if (detail::is_endpoint(interval, t)) {
                merged.back() = t;
            }
        }
        xs = std::move(merged);
    };
    normalize_atoms(atoms);

    OptimalSolution out;
    out.interval = interval;
    int total_iterations = 0;
    for (int restart = 0; restart <= opts.max_restarts; ++restart) {
        std::vector<int> interior;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            if (!detail::is_endpoint(interval, atoms[i])) { interior.push_back(static_cast<int>(i)); }
        }
        detail::SupportState st = detail::support_state(kernel, atoms);
        double residual = 0.0;
        bool restart_needed = false;
        if (!interior.empty()) {
            Eigen::VectorXd f = detail::stationarity_residual(kernel, interval, st, interior);
            residual = f.lpNorm<Eigen::Infinity>();
            int it = 0;
            for (; it < opts.max_newton_iterations && residual > opts.newton_tolerance; ++it) {
                const Eigen::MatrixXd jac = detail::stationarity_jacobian(kernel, st, interior);
                const Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(-f);
                if (!step.allFinite()) { throw ConvergenceError("singular Jacobian in support refinement"); }
                double lambda = 1.0;
                bool accepted = false;
                std::vector<double> trial;
                for (int ls = 0; ls < 40; ++ls, lambda *= 0.5) {
                    trial = atoms;
                    for (std::size_t r = 0; r < interior.size(); ++r) {
                        trial[static_cast<std::size_t>(interior[r])] += lambda * step(static_cast<Eigen::Index>(r));
                    }
                    bool leaves = false;
                    for (int idx : interior) {
                        const double t = trial[static_cast<std::size_t>(idx)];
                        if (t <= interval.a + snap || t >= interval.b - snap) { leaves = true; }
                    }
                    bool ordered = std::is_sorted(trial.begin(), trial.end());
                    for (std::size_t i = 1; ordered && i < trial.size(); ++i) {
                        if (trial[i] - trial[i - 1] <= collide) { ordered = false; }
                    }
                    if (leaves || !ordered) {
                        if (lambda == 1.0) {
                            // full step exits: project and restart with the new pattern
                            for (double &t : trial) { t = std::clamp(t, interval.a, interval.b); }
                            atoms = trial;
                            normalize_atoms(atoms);
                            restart_needed = true;
                            break;
                        }
                        continue;
                    }
                    detail::SupportState trial_st;
                    try {
                        trial_st = detail::support_state(kernel, trial);
                    } catch (const ConvergenceError &) {
                        continue;
                    }
                    const Eigen::VectorXd trial_f = detail::stationarity_residual(kernel, interval, trial_st, interior);
                    const double trial_res = trial_f.lpNorm<Eigen::Infinity>();
                    if (trial_res < residual || ls == 39) {
                        atoms = trial;
                        st = std::move(trial_st);
                        f = trial_f;
                        residual = trial_res;
                        accepted = true;
                        break;
                    }
                }
                if (restart_needed) { break; }
                if (!accepted) { break; }
            }
            total_iterations += it;
            if (restart_needed) { continue; }
            if (residual > opts.newton_tolerance) {
                throw ConvergenceError("support refinement did not converge (residual " + std::to_string(residual) +
                                       ")");
            }
        }
        // weights and sign pattern
        const double theta_sum = st.theta.sum();
        Eigen::Index worst = 0;
        const double min_theta = st.theta.minCoeff(&worst);
        if (!(theta_sum > 0.0)) { throw ConvergenceError("nonpositive total mass in support refinement"); }
        if (min_theta <= 1e-13 * theta_sum && atoms.size() > 1) {
            atoms.erase(atoms.begin() + worst);
            continue;
        }
        out.measure.atoms = atoms;
        out.measure.weights.resize(atoms.size());
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            out.measure.weights[i] = st.theta(static_cast<Eigen::Index>(i)) / theta_sum;
        }
        out.sigma = st.sigma;
        out.theta = st.theta;
        out.v_star = 1.0 / theta_sum;
        out.newton_residual = residual;
        out.newton_iterations = total_iterations;
        out.converged = true;
        return out;
    }
    throw ConvergenceError("support refinement exceeded its restart budget");
}

struct KktCertificate {
    double kkt_min = 0.0;
    double argmin = 0.0;
    std::vector<double> violations;  // grid points where mu_hat < 1 - tol
    double flat_fraction = 0.0;      // share of grid points with |mu_hat - 1| <= flat tolerance
};

/// mu_hat(t) = sum_j w_j R(t, t_j) / V* for an arbitrary atomic measure.
inline double mu_hat(const Kernel &kernel, const AtomicMeasure &m, double v, double t) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m.atoms.size(); ++j) { sum += m.weights[j] * kernel.eval(t, m.atoms[j]); }
    return sum / v;
}

inline KktCertificate verify_kkt(const Kernel &kernel, const OptimalSolution &sol, int verify_grid_n = 4001,
                                 double tol = 1e-8, double flat_tol = 1e-6) {
    detail::require(verify_grid_n >= 2, "verification grid needs at least two points");
    KktCertificate cert;
    cert.kkt_min = std::numeric_limits<double>::infinity();
    const auto grid = uniform_grid(sol.interval, verify_grid_n);
    std::size_t flat = 0;
    for (double t : grid) {
        const double m = mu_hat(kernel, sol.measure, sol.v_star, t);
        if (m < cert.kkt_min) {
            cert.kkt_min = m;
            cert.argmin = t;
        }
        if (m < 1.0 - tol) { cert.violations.push_back(t); }
        if (std::abs(m - 1.0) <= flat_tol) { ++flat; }
    }
    cert.flat_fraction = static_cast<double>(flat) / static_cast<double>(grid.size());
    return cert;
}

namespace detail {

inline OptimalSolution degenerate_solution(const Kernel &kernel, const Interval &interval, const GridSolution &grid,
                                           const SolverOptions &opts, std::string message) {
    OptimalSolution out;
    out.interval = interval;
    double total = 0.0;
    for (std::size_t i = 0; i < grid.grid.size(); ++i) {
        if (grid.weights[i] > opts.mass_floor) {
            out.measure.atoms.push_back(grid.grid[i]);
            out.measure.weights.push_back(grid.weights[i]);
            total += grid.weights[i];
        }
    }
    for (double &w : out.measure.weights) { w /= total; }
    out.sigma = covariance_matrix(kernel, out.measure.atoms);
    out.v_star = out.measure.weights.empty() ? grid.objective : [&] {
        Eigen::Map<const Eigen::VectorXd> w(out.measure.weights.data(), static_cast<Eigen::Index>(out.measure.weights.size()));
        return w.dot(out.sigma * w);
    }();
    out.kkt_grid_n = opts.verify_grid_n;
    out.kkt_min = verify_kkt(kernel, out, opts.verify_grid_n, opts.kkt_tolerance, opts.flat_tolerance).kkt_min;
    out.converged = false;
    out.degenerate_flat = true;
    out.message = std::move(message);
    return out;
}

}  // namespace detail

/// Full pipeline: grid QP, atom extraction, Newton refinement with KKT exchange rounds,
/// and the flatness test for continuous-support minimizers.
inline OptimalSolution solve(const Kernel &kernel, const Interval &interval, const SolverOptions &opts = {}) {
    if (interval.degenerate()) {
        OptimalSolution out = refine_support(kernel, interval, AtomicMeasure{{interval.a}, {1.0}}, opts);
        out.kkt_min = 1.0;
        out.kkt_grid_n = 1;
        return out;
    }
    const GridSolution grid = solve_grid(kernel, interval, opts.grid_n, opts.gap_tolerance, opts.max_qp_iterations);

    {
        OptimalSolution probe;
        probe.interval = interval;
        double total = 0.0;
        for (std::size_t i = 0; i < grid.grid.size(); ++i) {
            if (grid.weights[i] > 0.0) {
                probe.measure.atoms.push_back(grid.grid[i]);
                probe.measure.weights.push_back(grid.weights[i]);
                total += grid.weights[i];
            }
        }
        for (double &w : probe.measure.weights) { w /= total; }
        probe.v_star = grid.objective;
        const KktCertificate cert = verify_kkt(kernel, probe, opts.verify_grid_n, opts.kkt_tolerance, opts.flat_tolerance);
        if (cert.flat_fraction > opts.flat_fraction) {
            return detail::degenerate_solution(kernel, interval, grid, opts, "continuous-support minimizer detected");
        }
    }

    AtomicMeasure measure;
    try {
        measure = extract_atoms(grid, opts.merge_radius, opts.mass_floor, opts.max_atoms, opts.max_cluster_nodes);
    } catch (const DegenerateSupport &e) {
        return detail::degenerate_solution(kernel, interval, grid, opts,
                                           std::string("continuous-support minimizer detected: ") + e.what());
    }

    OptimalSolution sol;
    KktCertificate cert;
    for (int round = 0; round <= opts.max_exchange_rounds; ++round) {
        sol = refine_support(kernel, interval, measure, opts);
        cert = verify_kkt(kernel, sol, opts.verify_grid_n, opts.kkt_tolerance, opts.flat_tolerance);
        if (cert.violations.empty()) { break; }
        measure = sol.measure;
        auto pos = std::lower_bound(measure.atoms.begin(), measure.atoms.end(), cert.argmin);
        if (pos != measure.atoms.end() && *pos == cert.argmin) { break; }
        const auto idx = pos - measure.atoms.begin();
        measure.atoms.insert(pos, cert.argmin);
        measure.weights.insert(measure.weights.begin() + idx, 0.0);
    }
    sol.kkt_min = cert.kkt_min;
    sol.kkt_grid_n = opts.verify_grid_n;
    sol.converged = sol.converged && cert.violations.empty();
    if (cert.flat_fraction > opts.flat_fraction || static_cast<int>(sol.measure.size()) > opts.max_atoms) {
        sol.degenerate_flat = true;
        sol.converged = false;
        sol.message = "continuous-support minimizer detected";
    }
    return sol;
}

enum class Breakpoint { C1, C2 };

/// Middle weight of the symmetric three-atom measure {0, y/2, y} for a stationary kernel.
inline double three_atom_middle_weight(const Kernel &kernel, double y) {
    const std::vector<double> atoms{0.0, 0.5 * y, y};
    const Eigen::MatrixXd sigma = covariance_matrix(kernel, atoms);
    const Eigen::VectorXd theta = sigma.ldlt().solve(Eigen::VectorXd::Ones(3));
    return theta(1) / theta.sum();
}

/// Interval lengths at which the support pattern of a stationary kernel changes.
/// c1: the midpoint becomes essential (mu(b/2) = 1 for the two-endpoint measure);
/// c2: mu''(b/2) = 0 for the three-atom measure.
inline double breakpoint_solve(const Kernel &kernel, Breakpoint which, double y_max = -1.0) {
    detail::require(kernel.is_stationary(), "breakpoints are defined for stationary kernels");
    const double r0 = kernel.eval(0.0, 0.0);
    const double length = 1.0 / std::sqrt(kernel.second_spectral_moment());
    if (y_max <= 0.0) { y_max = 60.0 * length; }
    const double step = 1e-3 * length;

    auto c1_fn = [&](double y) { return 2.0 * kernel.eval(0.0, 0.5 * y) - r0 - kernel.eval(0.0, y); };
    auto c2_fn = [&](double y) {
        const double eps = three_atom_middle_weight(kernel, y);
        return (1.0 - eps) * kernel.deriv(0.0, 0.5 * y, 0, 2) + eps * kernel.deriv(0.0, 0.0, 0, 2);
    };

    auto first_root = [&](auto fn, double lo) {
        double x0 = lo;
        double f0 = fn(x0);
        for (double x1 = lo + step; x1 <= y_max; x1 += step) {
            const double f1 = fn(x1);
            if (f0 == 0.0) { return x0; }
            if ((f0 < 0.0) != (f1 < 0.0)) {
                boost::uintmax_t iters = 200;
                auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-13; };
                const auto r = boost::math::tools::toms748_solve(fn, x0, x1, f0, f1, tol, iters);
                return 0.5 * (r.first + r.second);
            }
            x0 = x1;
            f0 = f1;
        }
        throw ConvergenceError("no sign change found while bracketing the breakpoint");
    };

    const double c1 = first_root(c1_fn, step);
    if (which == Breakpoint::C1) { return c1; }
    return first_root(c2_fn, c1 + step);
}

}  // namespace gpmin
