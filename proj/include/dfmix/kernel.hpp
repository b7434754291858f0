#pragma once

// Pointwise closures of the Darcy-Forchheimer gas-flow model and the scalar/vector
// inequalities that the operator-level monotonicity properties reduce to.
//
//   rho(S)  = gamma * S / sqrt|S|          (ideal-gas density in terms of S = |p| p)
//   G(v)    = (alpha + beta |v|) v         (Darcy-Forchheimer drag)
//   F(g)    = G^{-1}(g)                    (flux as a function of the driving force)

#include <array>
#include <cmath>
#include <span>
#include <string>

#include "dfmix/error.hpp"

namespace dfmix {

using Vec2 = std::array<double, 2>;

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(const Vec2& a) { return std::hypot(a[0], a[1]); }

/// Pointwise coefficients of the closures.
///
/// beta == 0 is accepted as the linear Darcy limit; the physical model (and the
/// config front end) requires beta > 0.
struct ClosureParams {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;
    /// Radius used only in Jacobians: |v|_delta = sqrt(|v|^2 + delta^2).
    double smoothing_delta = 0.0;

    void validate() const
    {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw ContractError("ClosureParams: alpha must be positive and finite");
        if (!(beta >= 0.0) || !std::isfinite(beta))
            throw ContractError("ClosureParams: beta must be nonnegative and finite");
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw ContractError("ClosureParams: gamma must be positive and finite");
        if (!(smoothing_delta >= 0.0))
            throw ContractError("ClosureParams: smoothing_delta must be nonnegative");
    }
};

namespace detail {

inline void require_finite(double v, const char* where)
{
    if (!std::isfinite(v))
        throw DomainError(std::string(where) + ": non-finite input");
}

inline void require_finite(const Vec2& v, const char* where)
{
    require_finite(v[0], where);
    require_finite(v[1], where);
}

} // namespace detail

/// s / sqrt|s| = sign(s) sqrt|s|, with the limit value 0 at s = 0.
inline double signed_sqrt(double s)
{
    if (s == 0.0)
        return 0.0;
    return std::copysign(std::sqrt(std::abs(s)), s);
}

/// d/ds signed_sqrt(s) evaluated with |s| replaced by sqrt(s^2 + delta^2).
/// Infinite at s = 0 when delta = 0.
inline double signed_sqrt_slope(double s, double delta)
{
    const double mag = std::sqrt(s * s + delta * delta);
    return 0.5 / std::sqrt(mag);
}

inline double rho(const ClosureParams& params, double s)
{
    detail::require_finite(s, "rho");
    return params.gamma * signed_sqrt(s);
}

inline Vec2 g_closure(const ClosureParams& params, const Vec2& v)
{
    detail::require_finite(v, "g_closure");
    const double k = params.alpha + params.beta * norm(v);
    return {k * v[0], k * v[1]};
}

/// Magnitude r >= 0 solving beta r^2 + alpha r = |g|, evaluated without cancellation.
inline double f_closure_magnitude(double alpha, double beta, double g_mag)
{
    return 2.0 * g_mag / (alpha + std::sqrt(alpha * alpha + 4.0 * beta * g_mag));
}

inline Vec2 f_closure(const ClosureParams& params, const Vec2& g)
{
    detail::require_finite(g, "f_closure");
    const double g_mag = norm(g);
    if (g_mag == 0.0)
        return {0.0, 0.0};
    // r / |g| directly; stays finite as |g| -> 0 and for |g| huge.
    const double scale = 2.0 / (params.alpha + std::sqrt(params.alpha * params.alpha +
                                                         4.0 * params.beta * g_mag));
    return {scale * g[0], scale * g[1]};
}

/// Jacobian of v -> (alpha + beta |v|_delta) v, row-major 2x2.
inline std::array<double, 4> g_closure_jacobian(const ClosureParams& params, const Vec2& v)
{
    const double d = params.smoothing_delta;
    const double mag = std::sqrt(v[0] * v[0] + v[1] * v[1] + d * d);
    const double k = params.alpha + params.beta * mag;
    if (mag == 0.0)
        return {k, 0.0, 0.0, k};
    const double c = params.beta / mag;
    return {k + c * v[0] * v[0], c * v[0] * v[1], c * v[1] * v[0], k + c * v[1] * v[1]};
}

/// A pair of values whose order an inequality asserts.
struct InequalityPair {
    double lhs = 0.0;
    double rhs = 0.0;
};

namespace detail {

inline void require_same_dim(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw ContractError("inequality check: dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) {
        require_finite(x[i], "inequality check");
        require_finite(y[i], "inequality check");
    }
}

inline double euclid(std::span<const double> x)
{
    double s = 0.0;
    for (double v : x)
        s += v * v;
    return std::sqrt(s);
}

} // namespace detail

/// (|x|x - |y|y).(x - y) and 1/2 |x - y|^3; the first dominates the second.
inline InequalityPair check_vector_monotonicity(std::span<const double> x,
                                                std::span<const double> y)
{
    detail::require_same_dim(x, y);
    const double nx = detail::euclid(x);
    const double ny = detail::euclid(y);
    double lhs = 0.0;
    double diff2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        lhs += (nx * x[i] - ny * y[i]) * d;
        diff2 += d * d;
    }
    const double diff = std::sqrt(diff2);
    return {lhs, 0.5 * diff * diff * diff};
}

/// | |x|x - |y|y | and (|x| + |y|)|x - y|; the first is bounded by the second.
inline InequalityPair check_vector_continuity(std::span<const double> x,
                                              std::span<const double> y)
{
    detail::require_same_dim(x, y);
    const double nx = detail::euclid(x);
    const double ny = detail::euclid(y);
    double lhs2 = 0.0;
    double diff2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = nx * x[i] - ny * y[i];
        const double d = x[i] - y[i];
        lhs2 += a * a;
        diff2 += d * d;
    }
    return {std::sqrt(lhs2), (nx + ny) * std::sqrt(diff2)};
}

/// Hoelder continuity and monotonicity of s -> s / sqrt|s|.
/// holder_lhs <= holder_rhs and mono_lhs <= mono_rhs.
struct SqrtInequalities {
    double holder_lhs = 0.0;
    double holder_rhs = 0.0;
    double mono_lhs = 0.0;
    double mono_rhs = 0.0;
};

inline SqrtInequalities check_sqrt_monotonicity(double x, double y)
{
    detail::require_finite(x, "check_sqrt_monotonicity");
    detail::require_finite(y, "check_sqrt_monotonicity");
    const double fx = signed_sqrt(x);
    const double fy = signed_sqrt(y);
    const double d = x - y;
    SqrtInequalities out;
    out.holder_lhs = std::abs(fx - fy);
    out.holder_rhs = std::sqrt(2.0) * std::sqrt(std::abs(d));
    const double denom = std::sqrt(std::abs(x)) + std::sqrt(std::abs(y));
    out.mono_lhs = denom == 0.0 ? 0.0 : d * d / denom;
    // Same signs: fx - fy = d / (sqrt|x| + sqrt|y|) without cancellation.
    const double diff = (x * y > 0.0 && denom > 0.0) ? d / denom : fx - fy;
    out.mono_rhs = diff * d;
    return out;
}

} // namespace dfmix
