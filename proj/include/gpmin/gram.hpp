#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gpmin/kernels.hpp"

namespace gpmin {

/// A linear functional X_t^(order) of the process.
struct GramPoint {
    double location = 0.0;
    int order = 0;

    friend bool operator==(const GramPoint &, const GramPoint &) = default;
};

inline constexpr double kConditioningTolerance = 1e-10;

struct GramMatrix {
    Eigen::MatrixXd matrix;
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
    double condition_number = 0.0;  // max/min eigenvalue, +inf when min <= 0
    bool ill_conditioned = false;   // min/max <= kConditioningTolerance
};

/// Covariance matrix of the functionals X_{t_i}^(m_i).  Duplicate functionals are rejected;
/// near-singular matrices are flagged but returned unmodified.
inline GramMatrix gram_matrix(const Kernel &kernel, std::span<const GramPoint> points) {
    const auto n = static_cast<Eigen::Index>(points.size());
    detail::require(n > 0, "gram_matrix needs at least one point");
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            detail::require(!(points[i] == points[j]), "gram_matrix points must be pairwise distinct");
        }
    }
    GramMatrix out;
    out.matrix.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double v = kernel.deriv(points[i].location, points[j].location, points[i].order, points[j].order);
            out.matrix(i, j) = v;
            out.matrix(j, i) = v;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.matrix, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = eig.eigenvalues().minCoeff();
    out.max_eigenvalue = eig.eigenvalues().maxCoeff();
    out.condition_number = out.min_eigenvalue > 0.0 ? out.max_eigenvalue / out.min_eigenvalue
                                                    : std::numeric_limits<double>::infinity();
    out.ill_conditioned = !(out.max_eigenvalue > 0.0) ||
                          out.min_eigenvalue <= kConditioningTolerance * out.max_eigenvalue;
    return out;
}

inline GramMatrix gram_matrix(const Kernel &kernel, std::span<const double> locations) {
    std::vector<GramPoint> pts;
    pts.reserve(locations.size());
    for (double t : locations) { pts.push_back({t, 0}); }
    return gram_matrix(kernel, pts);
}

/// Plain covariance matrix R(t_i, t_j) without the spectral diagnostics.
inline Eigen::MatrixXd covariance_matrix(const Kernel &kernel, std::span<const double> locations) {
    const auto n = static_cast<Eigen::Index>(locations.size());
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            g(i, j) = kernel.eval(locations[i], locations[j]);
            g(j, i) = g(i, j);
        }
    }
    return g;
}

}  // namespace gpmin
