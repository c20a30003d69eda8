#pragma once

// Expected-error upper bounds for the four methods. Every evaluator takes the
// iteration count t and the squared norm of the initial error (which, with
// beta_0 = 0, is the squared norm of the regime's reference solution).

#include "rkgs/error.hpp"
#include "rkgs/linalg.hpp"
#include "rkgs/solvers.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>

namespace rkgs {

struct TheoryBound {
    double alpha = 0.0;         ///< 1 - sigma_min^2 / |X|_F^2
    double B = 0.0;             ///< |X beta_ref|^2 / |X|_F^2
    double kappa_sq_term = 3.0; ///< 1 + 2 kappa^2
    double horizon = 0.0;       ///< |r|^2 / sigma_min^2, zero for consistent systems
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    double kappa = 1.0;
    double frob_sq = 0.0;
};

inline TheoryBound make_bound(const DenseMatrix& X, const SpectralSummary& spec,
                              std::optional<std::span<const double>> reference,
                              std::optional<std::span<const double>> residual_ref) {
    TheoryBound b;
    b.sigma_min = spec.sigma_min;
    b.sigma_max = spec.sigma_max;
    b.kappa = spec.kappa;
    b.frob_sq = X.frob_sq();
    b.alpha = 1.0 - spec.lambda_min / b.frob_sq;
    b.kappa_sq_term = 1.0 + 2.0 * spec.kappa * spec.kappa;
    if (reference) b.B = norm_sq(matvec(X, *reference)) / b.frob_sq;
    if (residual_ref) b.horizon = norm_sq(*residual_ref) / spec.lambda_min;
    return b;
}

inline TheoryBound make_bound(const LinearSystem& sys, const SpectralSummary& spec) {
    std::optional<std::span<const double>> ref;
    std::optional<std::span<const double>> res;
    if (sys.reference) ref = std::span<const double>(*sys.reference);
    if (sys.residual_ref && sys.regime == Regime::OverInconsistent) res = std::span<const double>(*sys.residual_ref);
    return make_bound(sys.X, spec, ref, res);
}

inline TheoryBound make_bound(const LinearSystem& sys) { return make_bound(sys, spectral_summary(sys.X)); }

namespace detail {
inline double half_floor(std::size_t t) { return static_cast<double>(t / 2); }
} // namespace detail

/// alpha^t |beta_0 - beta*|^2
inline double bound_rk_consistent(const TheoryBound& b, std::size_t t, double init_err_sq) {
    return std::pow(b.alpha, static_cast<double>(t)) * init_err_sq;
}

/// alpha^t |beta_0 - beta_LS|^2 + |r|^2 / sigma_min^2
inline double bound_rk_inconsistent(const TheoryBound& b, std::size_t t, double init_err_sq) {
    return bound_rk_consistent(b, t, init_err_sq) + b.horizon;
}

/// Limit of bound_rk_inconsistent as t grows.
inline double rk_horizon(const TheoryBound& b) { return b.horizon; }

/// REK rate in terms of the singular values:
/// alpha^floor(t/2) (1 + 2 (sigma_min^2 / sigma_max^2) |beta_ref|^2).
inline double bound_rek(const TheoryBound& b, std::size_t t, double norm_ref_sq) {
    const double ratio = (b.sigma_min * b.sigma_min) / (b.sigma_max * b.sigma_max);
    return std::pow(b.alpha, detail::half_floor(t)) * (1.0 + 2.0 * ratio * norm_ref_sq);
}
inline double rek_rate_eq(const TheoryBound& b, std::size_t t, double norm_ref_sq) {
    return bound_rek(b, t, norm_ref_sq);
}

/// alpha^t (1 + 2 kappa^2) |beta_ref|^2: the shared REK/REGS envelope at iterate 2t.
inline double bound_comparison(const TheoryBound& b, std::size_t t, double norm_ref_sq) {
    return std::pow(b.alpha, static_cast<double>(t)) * b.kappa_sq_term * norm_ref_sq;
}

/// REK comparison envelope expressed at iteration t, i.e. bound_comparison(floor(t/2)).
inline double rek_comparison(const TheoryBound& b, std::size_t t, double norm_ref_sq) {
    return bound_comparison(b, t / 2, norm_ref_sq);
}

/// alpha^t |beta_LN|^2 + 2 alpha^floor(t/2) B / (1 - alpha)
inline double bound_regs(const TheoryBound& b, std::size_t t, double norm_ln_sq) {
    if (!(b.alpha < 1.0)) throw NumericalError("bound_regs: alpha >= 1, the bound is vacuous");
    return std::pow(b.alpha, static_cast<double>(t)) * norm_ln_sq +
           2.0 * std::pow(b.alpha, detail::half_floor(t)) * b.B / (1.0 - b.alpha);
}

/// alpha^t |beta_ref|^2 for RGS in regimes where it reaches the reference.
inline double bound_rgs(const TheoryBound& b, std::size_t t, double norm_ref_sq) {
    return bound_rk_consistent(b, t, norm_ref_sq);
}

/// Bound matching each method's expected behaviour in a regime; NaN for RGS on
/// underdetermined systems, which does not converge to the least-norm solution.
inline double bound_for(SolverKind kind, Regime regime, const TheoryBound& b, std::size_t t, double norm_ref_sq) {
    switch (kind) {
    case SolverKind::RK:
        return regime == Regime::OverInconsistent ? bound_rk_inconsistent(b, t, norm_ref_sq)
                                                  : bound_rk_consistent(b, t, norm_ref_sq);
    case SolverKind::RGS:
        if (regime == Regime::Underdetermined) return std::numeric_limits<double>::quiet_NaN();
        return bound_rgs(b, t, norm_ref_sq);
    case SolverKind::REK: return rek_comparison(b, t, norm_ref_sq);
    case SolverKind::REGS: return bound_regs(b, t, norm_ref_sq);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// L(beta) = 0.5 |y - X beta|^2
inline double objective(const LinearSystem& sys, std::span<const double> beta) {
    return 0.5 * norm_sq(residual(sys.X, sys.y, beta));
}

} // namespace rkgs
