#pragma once

#include "rkgs/error.hpp"
#include "rkgs/linalg.hpp"
#include "rkgs/sampling.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rkgs {

enum class SolverKind { RK, RGS, REK, REGS };

inline constexpr SolverKind kAllSolvers[] = {SolverKind::RK, SolverKind::RGS, SolverKind::REK, SolverKind::REGS};

inline std::string_view to_string(SolverKind k) {
    switch (k) {
    case SolverKind::RK: return "RK";
    case SolverKind::RGS: return "RGS";
    case SolverKind::REK: return "REK";
    case SolverKind::REGS: return "REGS";
    }
    return "?";
}

inline SolverKind parse_solver_kind(std::string_view s) {
    std::string up(s);
    for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (SolverKind k : kAllSolvers)
        if (up == to_string(k)) return k;
    throw ConfigError("unknown solver '" + std::string(s) + "' (expected rk, rgs, rek or regs)");
}

/// Iterate of one of the four methods.
///
/// `residual` holds y - X beta. Column methods (RGS, REGS) update it in O(m)
/// per step and recompute it from scratch every kResidualRefreshInterval
/// steps; row methods leave it stale between calls to refresh_residual().
struct SolverState {
    Vector beta;
    std::optional<Vector> z; ///< REK: length m, tracks y's part outside range(X). REGS: length n.
    Vector residual;
    std::size_t iteration = 0;
    bool residual_tracked = false;
};

inline constexpr std::size_t kResidualRefreshInterval = 1000;

/// beta_0 = 0 for every method; z_0 = y for REK and 0 for REGS.
inline SolverState initial_state(const LinearSystem& sys, SolverKind kind) {
    SolverState s;
    s.beta.assign(sys.cols(), 0.0);
    s.residual = sys.y;
    s.residual_tracked = kind == SolverKind::RGS || kind == SolverKind::REGS;
    if (kind == SolverKind::REK) s.z = sys.y;
    if (kind == SolverKind::REGS) s.z = Vector(sys.cols(), 0.0);
    return s;
}

inline void refresh_residual(const LinearSystem& sys, SolverState& s) {
    s.residual = residual(sys.X, sys.y, s.beta);
}

/// The method's reported solution: beta, or beta - z for REGS.
inline Vector estimate(const SolverState& s, SolverKind kind) {
    if (kind == SolverKind::REGS) return subtract(s.beta, *s.z);
    return s.beta;
}

inline double estimate_error_sq(const SolverState& s, SolverKind kind, std::span<const double> ref) {
    if (kind != SolverKind::REGS) return distance_sq(s.beta, ref);
    const Vector& z = *s.z;
    double acc = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
        const double d = s.beta[k] - z[k] - ref[k];
        acc += d * d;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// single updates with given indices
// ---------------------------------------------------------------------------

namespace detail {

inline void after_column_update(const LinearSystem& sys, SolverState& s) {
    ++s.iteration;
    if (s.iteration % kResidualRefreshInterval == 0) refresh_residual(sys, s);
}

} // namespace detail

/// Project beta onto the hyperplane X^i beta = y^i.
inline void rk_update(const LinearSystem& sys, SolverState& s, std::size_t i) {
    const auto row = sys.X.row(i);
    const double c = (sys.y[i] - dot(row, s.beta)) / sys.X.row_norm_sq(i);
    axpy(c, row, s.beta);
    ++s.iteration;
}

/// Exact minimisation of |y - X beta|^2 along coordinate j.
inline void rgs_update(const LinearSystem& sys, SolverState& s, std::size_t j) {
    const auto col = sys.X.col(j);
    const double c = dot(col, s.residual) / sys.X.col_norm_sq(j);
    s.beta[j] += c;
    axpy(-c, col, s.residual);
    detail::after_column_update(sys, s);
}

/// Column projection of z, then a row projection of beta against y - z.
inline void rek_update(const LinearSystem& sys, SolverState& s, std::size_t i, std::size_t j) {
    Vector& z = *s.z;
    const auto col = sys.X.col(j);
    axpy(-dot(col, z) / sys.X.col_norm_sq(j), col, z);
    const auto row = sys.X.row(i);
    const double c = (sys.y[i] - z[i] - dot(row, s.beta)) / sys.X.row_norm_sq(i);
    axpy(c, row, s.beta);
    ++s.iteration;
}

/// Coordinate step gamma = (X_(j)^T r / |X_(j)|^2) e_j on beta, then
/// z <- P_i (z + gamma).
inline void regs_update(const LinearSystem& sys, SolverState& s, std::size_t j, std::size_t i) {
    Vector& z = *s.z;
    const auto col = sys.X.col(j);
    const double gamma = dot(col, s.residual) / sys.X.col_norm_sq(j);
    s.beta[j] += gamma;
    axpy(-gamma, col, s.residual);
    z[j] += gamma;
    const auto row = sys.X.row(i);
    axpy(-dot(row, z) / sys.X.row_norm_sq(i), row, z);
    detail::after_column_update(sys, s);
}

// ---------------------------------------------------------------------------
// randomized steps
// ---------------------------------------------------------------------------

/// Row and column distributions of one matrix, built once per solve.
struct Sampler {
    explicit Sampler(const DenseMatrix& X) : rows(row_distribution(X)), cols(col_distribution(X)) {}
    WeightedIndex rows;
    WeightedIndex cols;
};

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

/// Indices consumed by one step; kNoIndex where the method draws no row/column.
struct StepDraw {
    std::size_t row = kNoIndex;
    std::size_t col = kNoIndex;
};

inline StepDraw rk_step(const LinearSystem& sys, const Sampler& smp, SolverState& s, Prng& rng) {
    const std::size_t i = smp.rows.sample(rng);
    rk_update(sys, s, i);
    return {i, kNoIndex};
}

inline StepDraw rgs_step(const LinearSystem& sys, const Sampler& smp, SolverState& s, Prng& rng) {
    const std::size_t j = smp.cols.sample(rng);
    rgs_update(sys, s, j);
    return {kNoIndex, j};
}

/// Draw order: column, then row.
inline StepDraw rek_step(const LinearSystem& sys, const Sampler& smp, SolverState& s, Prng& rng) {
    const std::size_t j = smp.cols.sample(rng);
    const std::size_t i = smp.rows.sample(rng);
    rek_update(sys, s, i, j);
    return {i, j};
}

/// Draw order: column, then row.
inline StepDraw regs_step(const LinearSystem& sys, const Sampler& smp, SolverState& s, Prng& rng) {
    const std::size_t j = smp.cols.sample(rng);
    const std::size_t i = smp.rows.sample(rng);
    regs_update(sys, s, j, i);
    return {i, j};
}

inline StepDraw step(SolverKind kind, const LinearSystem& sys, const Sampler& smp, SolverState& s, Prng& rng) {
    switch (kind) {
    case SolverKind::RK: return rk_step(sys, smp, s, rng);
    case SolverKind::RGS: return rgs_step(sys, smp, s, rng);
    case SolverKind::REK: return rek_step(sys, smp, s, rng);
    case SolverKind::REGS: return regs_step(sys, smp, s, rng);
    }
    return {};
}

// ---------------------------------------------------------------------------
// driver
// ---------------------------------------------------------------------------

enum class StopMetric { ErrorToReference, ResidualNorm };

inline StopMetric parse_stop_metric(std::string_view s) {
    if (s == "error") return StopMetric::ErrorToReference;
    if (s == "residual") return StopMetric::ResidualNorm;
    throw ConfigError("unknown stop metric '" + std::string(s) + "' (expected error or residual)");
}

/// Stops when the squared metric (|estimate - reference|^2 or |y - X beta|^2)
/// drops below tol. The residual metric is checked every step for column
/// methods and at recorded iterations for row methods, which do not track it.
struct SolveConfig {
    std::size_t max_iter = 100000;
    double tol = 1e-6;
    StopMetric stop_metric = StopMetric::ErrorToReference;
    std::size_t record_every = 1;
};

struct TraceRecord {
    std::size_t iteration = 0;
    double error_sq = 0.0; ///< NaN when the system carries no reference
    double residual_sq = 0.0;
    double elapsed_seconds = 0.0; ///< wall clock since the solve started; not deterministic
};

struct ConvergenceTrace {
    SolverKind solver = SolverKind::RK;
    std::size_t trial = 0;
    std::vector<TraceRecord> records;
    bool converged = false;
    std::size_t final_iteration = 0;

    [[nodiscard]] const TraceRecord& final_record() const { return records.back(); }
};

inline void validate(const SolveConfig& cfg) {
    if (cfg.max_iter == 0) throw ConfigError("max_iter must be positive");
    if (!(cfg.tol > 0.0)) throw ConfigError("tol must be positive");
    if (cfg.record_every == 0) throw ConfigError("record_every must be at least 1");
}

inline ConvergenceTrace run(const LinearSystem& sys, SolverKind kind, const SolveConfig& cfg, Prng& rng,
                            std::size_t trial = 0) {
    validate(cfg);
    if (cfg.stop_metric == StopMetric::ErrorToReference && !sys.reference) {
        throw ConfigError("stop metric 'error' needs a reference solution, but the system has none");
    }
    const Sampler sampler(sys.X);
    SolverState s = initial_state(sys, kind);

    ConvergenceTrace trace;
    trace.solver = kind;
    trace.trial = trial;

    auto error_sq = [&] {
        return sys.reference ? estimate_error_sq(s, kind, *sys.reference) : std::numeric_limits<double>::quiet_NaN();
    };
    auto residual_sq = [&] {
        if (!s.residual_tracked) refresh_residual(sys, s);
        return norm_sq(s.residual);
    };
    const auto start = std::chrono::steady_clock::now();
    auto record = [&](double err, double res) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        trace.records.push_back({s.iteration, err, res, secs});
    };

    // Cheap per-step check; nullopt means "only decidable at a record point".
    auto cheap_metric = [&]() -> std::optional<double> {
        if (cfg.stop_metric == StopMetric::ErrorToReference) return error_sq();
        if (s.residual_tracked) return norm_sq(s.residual);
        return std::nullopt;
    };

    {
        const double err = error_sq();
        const double res = residual_sq();
        record(err, res);
        const double m0 = cfg.stop_metric == StopMetric::ErrorToReference ? err : res;
        if (m0 < cfg.tol) {
            trace.converged = true;
            trace.final_iteration = 0;
            return trace;
        }
    }

    while (s.iteration < cfg.max_iter) {
        step(kind, sys, sampler, s, rng);
        const bool at_record = s.iteration % cfg.record_every == 0 || s.iteration == cfg.max_iter;
        const auto metric = cheap_metric();
        const bool stopped = metric && *metric < cfg.tol;
        if (at_record || stopped) {
            const double err = error_sq();
            const double res = residual_sq();
            record(err, res);
            const double m = cfg.stop_metric == StopMetric::ErrorToReference ? err : res;
            if (m < cfg.tol) {
                trace.converged = true;
                break;
            }
        }
    }
    trace.final_iteration = s.iteration;
    return trace;
}

} // namespace rkgs
