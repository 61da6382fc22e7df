#pragma once

// Covariance kernels of very smooth Gaussian processes with exact mixed
// partial derivatives.
//
// Stationary families are described by their lag function rho, R(s,t) = rho(t-s),
// and supply rho^(j) for every order up to kMaxDerivOrder.  The composite family
// builds X_t = Y g(t) + Z_t - L(Z) from a stationary base Z, an independent
// standard normal Y and a polynomial g.

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "gpmin/errors.hpp"

namespace gpmin {

inline constexpr int kMaxDerivOrder = 8;

struct Interval {
    double a = 0.0;
    double b = 0.0;

    Interval() = default;
    Interval(double lo, double hi) : a(lo), b(hi) {
        detail::require(std::isfinite(lo) && std::isfinite(hi), "interval endpoints must be finite");
        detail::require(lo <= hi, "interval requires a <= b");
    }

    [[nodiscard]] double length() const { return b - a; }
    [[nodiscard]] bool degenerate() const { return a == b; }
    [[nodiscard]] bool contains(double t) const { return t >= a && t <= b; }
};

namespace detail {

inline void check_order(int order) {
    if (order < 0 || order > kMaxDerivOrder) {
        throw InvalidArgument("derivative order " + std::to_string(order) + " is not supported (max " +
                              std::to_string(kMaxDerivOrder) + ")");
    }
}

// d^j/dy^j cos(y)
inline double cos_deriv(double y, int j) {
    switch (j & 3) {
        case 0: return std::cos(y);
        case 1: return -std::sin(y);
        case 2: return -std::cos(y);
        default: return std::sin(y);
    }
}

inline double sin_deriv(double y, int j) { return cos_deriv(y, j + 3); }

// probabilists' Hermite polynomial He_n(x)
inline double hermite_he(int n, double x) {
    double prev = 1.0;
    if (n == 0) { return prev; }
    double cur = x;
    for (int k = 1; k < n; ++k) {
        const double next = x * cur - k * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

// j-th derivative of sin(x)/x.
inline double sinc_deriv(double x, int j) {
    if (std::abs(x) < 3.0) {
        // termwise derivative of sum_i (-1)^i x^(2i) / (2i+1)!
        double sum = 0.0;
        for (int i = (j + 1) / 2; i < 60; ++i) {
            const int p = 2 * i - j;
            // x^p / p! / (2i+1)
            double term = 1.0;
            for (int q = 1; q <= p; ++q) { term *= x / q; }
            term /= (2 * i + 1);
            sum += (i % 2 == 0 ? term : -term);
            if (std::abs(term) < 1e-18 * (std::abs(sum) + 1e-300) && p > 4) { break; }
        }
        return sum;
    }
    // Leibniz rule on sin(x) * x^-1
    double sum = 0.0;
    double binom = 1.0;
    double fact = 1.0;
    for (int k = 0; k <= j; ++k) {
        if (k > 0) {
            binom = binom * (j - k + 1) / k;
            fact *= k;
        }
        const double inv_pow = std::pow(x, -(k + 1));
        const double term = binom * sin_deriv(x, j - k) * fact * inv_pow;
        sum += (k % 2 == 0 ? term : -term);
    }
    return sum;
}

inline double sine_integral(double x) {
    if (x == 0.0) { return 0.0; }
    auto f = [](double v) { return sinc_deriv(v, 0); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, x, 15, 1e-15);
}

}  // namespace detail

/// R(t) = exp(-t^2 / (2 scale^2))
struct GaussianKernel {
    double scale = 1.0;

    [[nodiscard]] double lag_deriv(double tau, int j) const {
        const double x = tau / scale;
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        return sign * detail::hermite_he(j, x) * std::exp(-0.5 * x * x) * std::pow(scale, -j);
    }

    /// Antiderivative of the lag function, vanishing at 0.
    [[nodiscard]] double lag_antideriv(double tau) const {
        return scale * std::sqrt(std::numbers::pi / 2.0) * boost::math::erf(tau / (scale * std::numbers::sqrt2));
    }
};

/// R(t) = sin(t/scale) / (t/scale): uniform spectral measure on [-1/scale, 1/scale].
struct SincKernel {
    double scale = 1.0;

    [[nodiscard]] double lag_deriv(double tau, int j) const {
        return detail::sinc_deriv(tau / scale, j) * std::pow(scale, -j);
    }

    [[nodiscard]] double lag_antideriv(double tau) const { return scale * detail::sine_integral(tau / scale); }
};

/// R(t) = sum_i w_i cos(t x_i): a finite spectral measure given as a quadrature rule.
struct SpectralKernel {
    std::vector<double> nodes;
    std::vector<double> weights;

    [[nodiscard]] double lag_deriv(double tau, int j) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            sum += weights[i] * std::pow(nodes[i], j) * detail::cos_deriv(tau * nodes[i], j);
        }
        return sum;
    }

    [[nodiscard]] double lag_antideriv(double tau) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            sum += nodes[i] == 0.0 ? weights[i] * tau : weights[i] * std::sin(tau * nodes[i]) / nodes[i];
        }
        return sum;
    }
};

using StationaryKernel = std::variant<GaussianKernel, SincKernel, SpectralKernel>;

inline double lag_deriv(const StationaryKernel &k, double tau, int j) {
    return std::visit([&](const auto &impl) { return impl.lag_deriv(tau, j); }, k);
}

inline double lag_antideriv(const StationaryKernel &k, double tau) {
    return std::visit([&](const auto &impl) { return impl.lag_antideriv(tau); }, k);
}

/// Linear functional L subtracted in the composite construction.
enum class ResidualFunctional { EvalAtZero, IntegralUnit };

/// X_t = Y g(t) + Z_t - L(Z), with Y ~ N(0,1) independent of the stationary Z.
struct CompositeKernel {
    std::vector<double> polynomial;  // ascending coefficients of g
    StationaryKernel base;
    ResidualFunctional functional = ResidualFunctional::EvalAtZero;
    double functional_variance = 0.0;  // Var(L(Z)), filled by the factory

    [[nodiscard]] double poly_deriv(double t, int m) const {
        double sum = 0.0;
        for (std::size_t i = polynomial.size(); i-- > static_cast<std::size_t>(m);) {
            double falling = 1.0;
            for (int q = 0; q < m; ++q) { falling *= static_cast<double>(i - q); }
            sum = sum * t + falling * polynomial[i];
        }
        return sum;
    }

    // d^m/ds^m Cov(Z_s, L(Z))
    [[nodiscard]] double functional_cov(double s, int m) const {
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        if (functional == ResidualFunctional::EvalAtZero) { return sign * lag_deriv(base, -s, m); }
        if (m == 0) { return lag_antideriv(base, 1.0 - s) - lag_antideriv(base, -s); }
        return -sign * (lag_deriv(base, -s, m - 1) - lag_deriv(base, 1.0 - s, m - 1));
    }

    [[nodiscard]] double deriv(double s, double t, int m, int n) const {
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        double value = poly_deriv(s, m) * poly_deriv(t, n) + sign * lag_deriv(base, t - s, m + n);
        if (n == 0) { value -= functional_cov(s, m); }
        if (m == 0) { value -= functional_cov(t, n); }
        if (m == 0 && n == 0) { value += functional_variance; }
        return value;
    }
};

class Kernel {
public:
    using Variant = std::variant<GaussianKernel, SincKernel, SpectralKernel, CompositeKernel>;

    static Kernel gaussian(double scale = 1.0) {
        detail::require(std::isfinite(scale) && scale > 0.0, "gaussian scale must be positive");
        return Kernel(GaussianKernel{scale});
    }

    static Kernel sinc(double scale = 1.0) {
        detail::require(std::isfinite(scale) && scale > 0.0, "sinc scale must be positive");
        return Kernel(SincKernel{scale});
    }

    static Kernel spectral(std::vector<double> nodes, std::vector<double> weights) {
        detail::require(!nodes.empty() && nodes.size() == weights.size(),
                        "spectral kernel needs matching, nonempty nodes and weights");
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            detail::require(std::isfinite(nodes[i]) && std::isfinite(weights[i]) && weights[i] >= 0.0,
                            "spectral nodes must be finite and weights nonnegative");
        }
        return Kernel(SpectralKernel{std::move(nodes), std::move(weights)});
    }

    static Kernel composite(std::vector<double> polynomial, const Kernel &base, ResidualFunctional functional) {
        detail::require(!polynomial.empty(), "composite kernel needs polynomial coefficients");
        detail::require(!base.is_composite(), "composite base must be a stationary kernel");
        CompositeKernel c{std::move(polynomial), *base.stationary_part(), functional, 0.0};
        if (functional == ResidualFunctional::EvalAtZero) {
            c.functional_variance = lag_deriv(c.base, 0.0, 0);
        } else {
            // Var(int_0^1 Z) = 2 int_0^1 (1-x) rho(x) dx
            auto f = [&](double x) { return 2.0 * (1.0 - x) * lag_deriv(c.base, x, 0); };
            c.functional_variance =
                boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 15, 1e-15);
        }
        return Kernel(std::move(c));
    }

    /// Example of a process with a singleton optimal support: g(t) = 1 + t^2 - t^4, L(Z) = Z_0.
    static Kernel singleton_example(const Kernel &base = gaussian()) {
        return composite({1.0, 0.0, 1.0, 0.0, -1.0}, base, ResidualFunctional::EvalAtZero);
    }

    /// Process whose optimal measure on [0,1] is Lebesgue: g = 1, L(Z) = int_0^1 Z.
    static Kernel flat_example(const Kernel &base = gaussian()) {
        return composite({1.0}, base, ResidualFunctional::IntegralUnit);
    }

    [[nodiscard]] double eval(double s, double t) const { return deriv(s, t, 0, 0); }

    /// Cov(X_s^(m), X_t^(n)) = d^(m+n) R / ds^m dt^n.
    [[nodiscard]] double deriv(double s, double t, int m, int n) const {
        if (!std::isfinite(s) || !std::isfinite(t)) { throw InvalidArgument("kernel arguments must be finite"); }
        detail::check_order(m + n);
        return std::visit(
            [&](const auto &impl) -> double {
                if constexpr (std::is_same_v<std::decay_t<decltype(impl)>, CompositeKernel>) {
                    return impl.deriv(s, t, m, n);
                } else {
                    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
                    return sign * impl.lag_deriv(t - s, m + n);
                }
            },
            impl_);
    }

    [[nodiscard]] bool is_composite() const { return std::holds_alternative<CompositeKernel>(impl_); }
    [[nodiscard]] bool is_stationary() const { return !is_composite(); }

    /// The stationary kernel itself, or the base of a composite kernel.
    [[nodiscard]] const StationaryKernel *stationary_part() const { return &stationary_; }

    /// lambda_2 = -rho''(0) of the kernel (or of the base of a composite kernel).
    [[nodiscard]] double second_spectral_moment() const { return -lag_deriv(*stationary_part(), 0.0, 2); }

    [[nodiscard]] std::string family() const {
        switch (impl_.index()) {
            case 0: return "gaussian";
            case 1: return "sinc";
            case 2: return "spectral";
            default: return "composite";
        }
    }

    [[nodiscard]] const Variant &variant() const { return impl_; }

private:
    explicit Kernel(Variant v) : impl_(std::move(v)) {
        stationary_ = std::visit(
            [](const auto &impl) -> StationaryKernel {
                if constexpr (std::is_same_v<std::decay_t<decltype(impl)>, CompositeKernel>) {
                    return impl.base;
                } else {
                    return impl;
                }
            },
            impl_);
    }

    Variant impl_;
    StationaryKernel stationary_;
};

}  // namespace gpmin
