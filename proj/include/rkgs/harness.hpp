#pragma once

#include "rkgs/error.hpp"
#include "rkgs/io.hpp"
#include "rkgs/linalg.hpp"
#include "rkgs/problems.hpp"
#include "rkgs/sampling.hpp"
#include "rkgs/solvers.hpp"
#include "rkgs/theory.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace rkgs {

struct ExperimentConfig {
    std::filesystem::path system_dir; ///< used by the path-based overloads
    std::vector<SolverKind> solvers;
    std::size_t trials = 50;
    SolveConfig solve;
    std::uint64_t base_seed = 0;
    bool redraw_matrix_per_trial = false;
    std::size_t threads = 1; ///< 0 picks the hardware concurrency
};

struct AggregateRow {
    std::size_t iteration = 0;
    SolverKind solver = SolverKind::RK;
    double mean_err_sq = 0.0;
    double median_err_sq = 0.0;
    double min_err_sq = 0.0;
    double max_err_sq = 0.0;
    double bound_value = 0.0;
};

/// Mean cumulative wall-clock seconds at a recorded iteration. Not part of the
/// deterministic CSV.
struct TimingRow {
    std::size_t iteration = 0;
    SolverKind solver = SolverKind::RK;
    double mean_elapsed_seconds = 0.0;
};

struct SolverSummary {
    SolverKind solver = SolverKind::RK;
    std::size_t trials = 0;
    std::size_t trials_converged = 0;
    double median_final_err_sq = 0.0;
    std::size_t max_final_iteration = 0;
};

struct AggregateTrace {
    std::vector<AggregateRow> rows; ///< grouped by solver (config order), iteration ascending
    std::vector<TimingRow> timings;
    std::vector<SolverSummary> summaries;

    [[nodiscard]] const SolverSummary& summary(SolverKind k) const {
        for (const auto& s : summaries)
            if (s.solver == k) return s;
        throw ConfigError("no summary for solver " + std::string(to_string(k)));
    }
    [[nodiscard]] std::vector<AggregateRow> rows_for(SolverKind k) const {
        std::vector<AggregateRow> out;
        for (const auto& r : rows)
            if (r.solver == k) out.push_back(r);
        return out;
    }
};

/// Whether `kind` is expected to reach the regime's reference solution.
inline bool converges_to_reference(SolverKind kind, Regime regime) {
    if (kind == SolverKind::RK && regime == Regime::OverInconsistent) return false;
    if (kind == SolverKind::RGS && regime == Regime::Underdetermined) return false;
    return true;
}

inline void validate(const ExperimentConfig& cfg, const LinearSystem& sys) {
    if (cfg.trials == 0) throw ConfigError("trials must be at least 1");
    if (cfg.solvers.empty()) throw ConfigError("no solvers selected");
    validate(cfg.solve);
    if (cfg.solve.stop_metric == StopMetric::ErrorToReference && !sys.reference)
        throw ConfigError("stop metric 'error' needs a reference solution, but the system has none");
    for (SolverKind k : cfg.solvers) {
        if (k == SolverKind::RGS && sys.regime == Regime::Underdetermined &&
            cfg.solve.stop_metric == StopMetric::ErrorToReference) {
            std::ostringstream os;
            os << "RGS has no least-norm limit on an underdetermined system; valid solvers for "
               << to_string(sys.regime) << " with stop metric 'error':";
            for (SolverKind v : kAllSolvers)
                if (converges_to_reference(v, sys.regime)) os << ' ' << to_string(v);
            os << " (or use stop metric 'residual')";
            throw ConfigError(os.str());
        }
    }
}

namespace detail {

struct TrialResult {
    ConvergenceTrace trace;
    double norm_ref_sq = std::numeric_limits<double>::quiet_NaN();
    TheoryBound bound;
    bool has_bound = false;
};

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    std::vector<std::exception_ptr> errors(count);
    auto body = [&](std::size_t k) {
        try {
            fn(k);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };
    if (threads <= 1) {
        for (std::size_t k = 0; k < count; ++k) body(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < count; k = next++) body(k);
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace detail

/// Runs trials x solvers independent solves on `sys` and aggregates the error
/// traces on the shared grid 0, R, 2R, ... (R = record_every) up to the last
/// termination. Trials that stop early contribute their terminal error to the
/// later grid points. Output is independent of the thread count.
inline AggregateTrace run_experiment(const LinearSystem& sys, const ExperimentConfig& cfg) {
    validate(cfg, sys);

    const std::size_t trials = cfg.trials;
    std::vector<LinearSystem> redrawn;
    if (cfg.redraw_matrix_per_trial) {
        std::uint64_t seed0 = 0;
        if (auto it = sys.meta.find("seed"); it != sys.meta.end()) seed0 = std::stoull(it->second);
        redrawn.resize(trials);
        detail::parallel_for(trials, cfg.threads, [&](std::size_t k) {
            redrawn[k] = k == 0 ? sys : regenerate(sys, splitmix64(seed0 + k));
        });
    }
    auto system_for = [&](std::size_t trial) -> const LinearSystem& {
        return cfg.redraw_matrix_per_trial ? redrawn[trial] : sys;
    };

    // Bounds need the spectrum; compute once per distinct system.
    std::vector<TheoryBound> bounds(cfg.redraw_matrix_per_trial ? trials : 1);
    if (sys.reference) {
        detail::parallel_for(bounds.size(), cfg.threads,
                             [&](std::size_t k) { bounds[k] = make_bound(system_for(k)); });
    }

    const std::size_t nsolvers = cfg.solvers.size();
    std::vector<detail::TrialResult> results(nsolvers * trials);
    detail::parallel_for(results.size(), cfg.threads, [&](std::size_t idx) {
        const std::size_t s = idx / trials;
        const std::size_t trial = idx % trials;
        const LinearSystem& tsys = system_for(trial);
        Prng rng = spawn_trial_rng(cfg.base_seed, trial);
        results[idx].trace = run(tsys, cfg.solvers[s], cfg.solve, rng, trial);
        if (tsys.reference) {
            results[idx].norm_ref_sq = norm_sq(*tsys.reference);
            results[idx].bound = bounds[cfg.redraw_matrix_per_trial ? trial : 0];
            results[idx].has_bound = true;
        }
    });

    AggregateTrace agg;
    const std::size_t stride = cfg.solve.record_every;
    for (std::size_t s = 0; s < nsolvers; ++s) {
        const SolverKind kind = cfg.solvers[s];
        const auto first = results.begin() + static_cast<std::ptrdiff_t>(s * trials);
        const auto last = first + static_cast<std::ptrdiff_t>(trials);

        std::size_t horizon = 0;
        std::size_t converged = 0;
        std::vector<double> finals;
        for (auto it = first; it != last; ++it) {
            horizon = std::max(horizon, it->trace.final_iteration);
            converged += it->trace.converged ? 1 : 0;
            finals.push_back(it->trace.final_record().error_sq);
        }
        agg.summaries.push_back({kind, trials, converged, detail::median_of(finals), horizon});

        std::vector<std::size_t> grid;
        for (std::size_t g = 0; g <= horizon; g += stride) grid.push_back(g);
        if (grid.back() != horizon) grid.push_back(horizon);

        std::vector<std::size_t> cursor(trials, 0);
        std::vector<double> errs(trials);
        for (std::size_t g : grid) {
            double elapsed = 0.0;
            double bound_sum = 0.0;
            for (std::size_t k = 0; k < trials; ++k) {
                const auto& tr = first[static_cast<std::ptrdiff_t>(k)];
                const auto& recs = tr.trace.records;
                std::size_t& c = cursor[k];
                while (c + 1 < recs.size() && recs[c].iteration < g) ++c;
                errs[k] = recs[c].error_sq;
                elapsed += recs[c].elapsed_seconds;
                bound_sum += tr.has_bound ? bound_for(kind, system_for(k).regime, tr.bound, g, tr.norm_ref_sq)
                                          : std::numeric_limits<double>::quiet_NaN();
            }
            AggregateRow row;
            row.iteration = g;
            row.solver = kind;
            double sum = 0.0;
            for (double e : errs) sum += e;
            row.mean_err_sq = sum / static_cast<double>(trials);
            row.median_err_sq = detail::median_of(errs);
            row.min_err_sq = *std::min_element(errs.begin(), errs.end());
            row.max_err_sq = *std::max_element(errs.begin(), errs.end());
            row.bound_value = bound_sum / static_cast<double>(trials);
            agg.rows.push_back(row);
            agg.timings.push_back({g, kind, elapsed / static_cast<double>(trials)});
        }
    }
    return agg;
}

inline AggregateTrace run_experiment(const ExperimentConfig& cfg) {
    return run_experiment(load_system(cfg.system_dir), cfg);
}

/// All selected solvers on one shared system. Identical to run_experiment;
/// the per-block timings in the result are the CPU-time comparison.
inline AggregateTrace compare_solvers(const LinearSystem& sys, const ExperimentConfig& cfg) {
    return run_experiment(sys, cfg);
}

inline AggregateTrace compare_solvers(const ExperimentConfig& cfg) {
    return compare_solvers(load_system(cfg.system_dir), cfg);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kAggregateCsvHeader =
    "iteration,solver,mean_err_sq,median_err_sq,min_err_sq,max_err_sq,bound_value";
inline constexpr const char* kSolveCsvHeader = "trial,iteration,solver,error_sq,residual_sq";

inline void write_csv(std::ostream& out, const AggregateTrace& trace) {
    using io::format_double;
    out << kAggregateCsvHeader << '\n';
    for (const auto& r : trace.rows) {
        out << r.iteration << ',' << to_string(r.solver) << ',' << format_double(r.mean_err_sq) << ','
            << format_double(r.median_err_sq) << ',' << format_double(r.min_err_sq) << ','
            << format_double(r.max_err_sq) << ',' << format_double(r.bound_value) << '\n';
    }
}

inline void write_timing_csv(std::ostream& out, const AggregateTrace& trace) {
    out << "iteration,solver,mean_elapsed_seconds\n";
    for (const auto& t : trace.timings)
        out << t.iteration << ',' << to_string(t.solver) << ',' << io::format_double(t.mean_elapsed_seconds) << '\n';
}

inline void write_solve_csv(std::ostream& out, const ConvergenceTrace& trace) {
    using io::format_double;
    out << kSolveCsvHeader << '\n';
    for (const auto& r : trace.records) {
        out << trace.trial << ',' << r.iteration << ',' << to_string(trace.solver) << ','
            << format_double(r.error_sq) << ',' << format_double(r.residual_sq) << '\n';
    }
}

/// iteration,bound_value at 0, stride, 2*stride, ... up to max_iter.
inline void write_bounds_csv(std::ostream& out, SolverKind kind, const LinearSystem& sys, const TheoryBound& b,
                             std::size_t max_iter, std::size_t stride) {
    if (!sys.reference) throw ConfigError("bounds need a reference solution, but the system has none");
    if (stride == 0) throw ConfigError("record_every must be at least 1");
    const double norm_ref = norm_sq(*sys.reference);
    out << "iteration,bound_value\n";
    for (std::size_t t = 0; t <= max_iter; t += stride)
        out << t << ',' << io::format_double(bound_for(kind, sys.regime, b, t, norm_ref)) << '\n';
}

namespace detail {
template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& w) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    w(out);
    out.flush();
    if (!out) throw ConfigError("I/O error writing " + path.string());
}
} // namespace detail

inline void emit_csv(const AggregateTrace& trace, const std::filesystem::path& path) {
    detail::write_file(path, [&](std::ostream& out) { write_csv(out, trace); });
}

inline void emit_solve_csv(const ConvergenceTrace& trace, const std::filesystem::path& path) {
    detail::write_file(path, [&](std::ostream& out) { write_solve_csv(out, trace); });
}

inline void emit_timing_csv(const AggregateTrace& trace, const std::filesystem::path& path) {
    detail::write_file(path, [&](std::ostream& out) { write_timing_csv(out, trace); });
}

} // namespace rkgs
