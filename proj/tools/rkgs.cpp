// rkgs: generate systems, run the randomized solvers, and emit CSV traces.
//
//   rkgs gen     --m 500 --n 50 --regime over-inconsistent --seed 1 --out sys/
//   rkgs tomo    --grid-n 20 --oversample 3 --seed 1 --out tomo/
//   rkgs solve   --system sys/ --solver rek --out trace.csv
//   rkgs compare --system sys/ --solvers rgs,rek,regs --trials 50 --out agg.csv
//   rkgs bounds  --system sys/ --solver regs --max-iter 20000 --out bound.csv
//
// Exit codes: 0 success, 2 configuration error, 3 numerical error.

#include "rkgs/harness.hpp"
#include "rkgs/problems.hpp"
#include "rkgs/solvers.hpp"
#include "rkgs/theory.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct GlobalOptions {
    std::uint64_t seed = 0;
    double tol = 1e-6;
    std::size_t max_iter = 100000;
    std::size_t trials = 50;
    std::size_t record_every = 100;
    std::string out;
};

rkgs::SolveConfig solve_config(const GlobalOptions& g, const std::string& stop_metric) {
    rkgs::SolveConfig cfg;
    cfg.max_iter = g.max_iter;
    cfg.tol = g.tol;
    cfg.record_every = g.record_every;
    cfg.stop_metric = rkgs::parse_stop_metric(stop_metric);
    return cfg;
}

std::vector<rkgs::SolverKind> parse_solver_list(const std::vector<std::string>& names) {
    std::vector<rkgs::SolverKind> out;
    for (const auto& n : names) out.push_back(rkgs::parse_solver_kind(n));
    return out;
}

void require_out(const GlobalOptions& g, const char* what) {
    if (g.out.empty()) throw rkgs::ConfigError(std::string("--out is required for ") + what);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomized Kaczmarz / Gauss-Seidel solvers and experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Base seed for every random stream")->capture_default_str();
    app.add_option("--tol", g.tol, "Stopping tolerance on the squared metric")->capture_default_str();
    app.add_option("--max-iter", g.max_iter, "Iteration cap per solve")->capture_default_str();
    app.add_option("--trials", g.trials, "Trials per solver (compare)")->capture_default_str();
    app.add_option("--record-every", g.record_every, "History stride")->capture_default_str();
    app.add_option("--out", g.out, "Output directory (gen, tomo) or CSV file");

    // gen
    auto* gen = app.add_subcommand("gen", "Gaussian system in one of the three regimes");
    std::size_t gm = 0, gn = 0;
    std::string regime = "over-consistent";
    double noise_scale = 1.0;
    gen->add_option("--m", gm, "Rows")->required();
    gen->add_option("--n", gn, "Columns")->required();
    gen->add_option("--regime", regime, "over-consistent | over-inconsistent | underdetermined")
        ->capture_default_str();
    gen->add_option("--noise-scale", noise_scale, "Scale of the inconsistent residual")->capture_default_str();

    // tomo
    auto* tomo = app.add_subcommand("tomo", "Random-line tomography system (N^2 x d N^2)");
    std::size_t grid_n = 20, oversample = 3;
    tomo->add_option("--grid-n", grid_n, "Grid size N")->capture_default_str();
    tomo->add_option("--oversample", oversample, "Oversampling factor d (>= 2)")->capture_default_str();

    // solve
    auto* solve = app.add_subcommand("solve", "Single trial; per-iteration CSV");
    std::string system_dir, solver_name = "rk", stop_metric = "error";
    std::size_t trial = 0;
    solve->add_option("--system", system_dir, "System directory")->required();
    solve->add_option("--solver", solver_name, "rk | rgs | rek | regs")->capture_default_str();
    solve->add_option("--stop-metric", stop_metric, "error | residual")->capture_default_str();
    solve->add_option("--trial", trial, "Trial index (selects the random stream)")->capture_default_str();

    // compare
    auto* compare = app.add_subcommand("compare", "Multi-trial aggregate CSV for several solvers");
    std::vector<std::string> solver_names{"rk", "rgs", "rek", "regs"};
    std::size_t threads = 1;
    bool redraw = false;
    std::string timing_out;
    std::string cmp_stop = "error";
    compare->add_option("--system", system_dir, "System directory")->required();
    compare->add_option("--solvers", solver_names, "Comma-separated solvers")->delimiter(',')->capture_default_str();
    compare->add_option("--stop-metric", cmp_stop, "error | residual")->capture_default_str();
    compare->add_option("--threads", threads, "Worker threads, 0 = all cores")->capture_default_str();
    compare->add_flag("--redraw", redraw, "Regenerate the matrix for every trial");
    compare->add_option("--timing-out", timing_out, "Optional CSV of mean wall-clock per recorded block");

    // bounds
    auto* bounds = app.add_subcommand("bounds", "Theoretical bound curve as CSV");
    std::string bound_solver = "regs";
    bounds->add_option("--system", system_dir, "System directory")->required();
    bounds->add_option("--solver", bound_solver, "rk | rgs | rek | regs")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (gen->parsed()) {
            require_out(g, "gen");
            rkgs::GenSpec spec{gm, gn, rkgs::parse_regime(regime), g.seed, noise_scale};
            rkgs::save_system(rkgs::gen_gaussian(spec), g.out);
        } else if (tomo->parsed()) {
            require_out(g, "tomo");
            rkgs::save_system(rkgs::gen_tomography({grid_n, oversample, g.seed}), g.out);
        } else if (solve->parsed()) {
            require_out(g, "solve");
            const auto sys = rkgs::load_system(system_dir);
            auto rng = rkgs::spawn_trial_rng(g.seed, trial);
            const auto trace =
                rkgs::run(sys, rkgs::parse_solver_kind(solver_name), solve_config(g, stop_metric), rng, trial);
            rkgs::emit_solve_csv(trace, g.out);
        } else if (compare->parsed()) {
            require_out(g, "compare");
            rkgs::ExperimentConfig cfg;
            cfg.system_dir = system_dir;
            cfg.solvers = parse_solver_list(solver_names);
            cfg.trials = g.trials;
            cfg.solve = solve_config(g, cmp_stop);
            cfg.base_seed = g.seed;
            cfg.redraw_matrix_per_trial = redraw;
            cfg.threads = threads;
            const auto agg = rkgs::compare_solvers(cfg);
            rkgs::emit_csv(agg, g.out);
            if (!timing_out.empty()) rkgs::emit_timing_csv(agg, timing_out);
            for (const auto& s : agg.summaries) {
                std::cerr << rkgs::to_string(s.solver) << ": " << s.trials_converged << "/" << s.trials
                          << " trials converged, median final error " << s.median_final_err_sq << '\n';
            }
        } else if (bounds->parsed()) {
            require_out(g, "bounds");
            const auto sys = rkgs::load_system(system_dir);
            const auto tb = rkgs::make_bound(sys);
            rkgs::detail::write_file(g.out, [&](std::ostream& out) {
                rkgs::write_bounds_csv(out, rkgs::parse_solver_kind(bound_solver), sys, tb, g.max_iter,
                                       g.record_every);
            });
        }
    } catch (const rkgs::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const rkgs::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
