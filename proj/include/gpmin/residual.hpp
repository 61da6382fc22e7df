#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gpmin/errors.hpp"
#include "gpmin/gram.hpp"
#include "gpmin/kernels.hpp"

namespace gpmin {

/// Linear-Gaussian conditioning on the support values X_S.
///
/// For a functional X_t^(m) the conditional-mean coefficients are
/// a^(m)(t) = Sigma^{-1} r^(m)(t) with r^(m)_i(t) = d^m/dt^m R(t, t_i), and the
/// residual Z_t^(m) = X_t^(m) - a^(m)(t)' X_S is independent of X_S.
class ConditionalProjection {
public:
    ConditionalProjection(Kernel kernel, std::vector<double> support)
        : kernel_(std::move(kernel)), support_(std::move(support)) {
        detail::require(!support_.empty(), "conditioning set must be nonempty");
        sigma_ = covariance_matrix(kernel_, support_);
        llt_.compute(sigma_);
        if (llt_.info() != Eigen::Success) { throw ConvergenceError("support covariance is not positive definite"); }
    }

    [[nodiscard]] const Kernel &kernel() const { return kernel_; }
    [[nodiscard]] const std::vector<double> &support() const { return support_; }
    [[nodiscard]] const Eigen::MatrixXd &sigma() const { return sigma_; }
    [[nodiscard]] const Eigen::LLT<Eigen::MatrixXd> &sigma_llt() const { return llt_; }

    [[nodiscard]] Eigen::VectorXd cross(const GramPoint &p) const {
        Eigen::VectorXd r(static_cast<Eigen::Index>(support_.size()));
        for (std::size_t i = 0; i < support_.size(); ++i) {
            r(static_cast<Eigen::Index>(i)) = kernel_.deriv(p.location, support_[i], p.order, 0);
        }
        return r;
    }

    /// Rows are a^(m)(t)' for each functional.
    [[nodiscard]] Eigen::MatrixXd mean_map(std::span<const GramPoint> points) const {
        Eigen::MatrixXd r(static_cast<Eigen::Index>(support_.size()), static_cast<Eigen::Index>(points.size()));
        for (std::size_t j = 0; j < points.size(); ++j) { r.col(static_cast<Eigen::Index>(j)) = cross(points[j]); }
        return llt_.solve(r).transpose();
    }

    /// Cov(Z_p, Z_q) = R_{m_p m_q}(s_p, s_q) - r_p' Sigma^{-1} r_q  (Schur complement).
    [[nodiscard]] Eigen::MatrixXd residual_covariance(std::span<const GramPoint> points) const {
        const auto n = static_cast<Eigen::Index>(points.size());
        Eigen::MatrixXd r(static_cast<Eigen::Index>(support_.size()), n);
        for (Eigen::Index j = 0; j < n; ++j) { r.col(j) = cross(points[static_cast<std::size_t>(j)]); }
        const Eigen::MatrixXd half = llt_.matrixL().solve(r);
        Eigen::MatrixXd cov = -half.transpose() * half;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i; j < n; ++j) {
                const auto &p = points[static_cast<std::size_t>(i)];
                const auto &q = points[static_cast<std::size_t>(j)];
                cov(i, j) += kernel_.deriv(p.location, q.location, p.order, q.order);
                if (j != i) { cov(j, i) = cov(i, j); }
            }
        }
        return 0.5 * (cov + cov.transpose());
    }

private:
    Kernel kernel_;
    std::vector<double> support_;
    Eigen::MatrixXd sigma_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace gpmin
