#include "helpers.hpp"
#include "rkgs/problems.hpp"
#include "rkgs/solvers.hpp"
#include "rkgs/theory.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rkgs;
using testing_helpers::expect_vec_near;
using testing_helpers::gaussian_matrix;
using testing_helpers::to_oracle;

namespace {

LinearSystem make_system(DenseMatrix X, Vector y, Regime regime, std::optional<Vector> ref = std::nullopt) {
    LinearSystem s;
    s.X = std::move(X);
    s.y = std::move(y);
    s.regime = regime;
    s.reference = std::move(ref);
    validate(s);
    return s;
}

LinearSystem small_consistent(Prng& rng, std::size_t m, std::size_t n) {
    auto X = gaussian_matrix(rng, m, n);
    const auto beta = gaussian_vector(rng, n);
    auto y = matvec(X, beta);
    if (m >= n) return make_system(std::move(X), std::move(y), Regime::OverConsistent, beta);
    auto ref = least_norm_ref(X, y);
    return make_system(std::move(X), std::move(y), Regime::Underdetermined, std::move(ref));
}

} // namespace

// --- RK ---------------------------------------------------------------------

TEST(RkStep, CoordinateProjection) {
    const auto sys = make_system(DenseMatrix::identity(2), {2, 3}, Regime::OverConsistent);
    auto s = initial_state(sys, SolverKind::RK);
    rk_update(sys, s, 0);
    expect_vec_near(s.beta, Vector{2, 0}, 0.0);
    EXPECT_EQ(s.iteration, 1u);
}

TEST(RkStep, HyperplaneProjection) {
    const auto sys = make_system(DenseMatrix::from_rows({{1, 1}}), {2}, Regime::Underdetermined);
    auto s = initial_state(sys, SolverKind::RK);
    rk_update(sys, s, 0);
    expect_vec_near(s.beta, Vector{1, 1}, 1e-15);
}

TEST(RkStep, ExpectedErrorByEnumeration) {
    // rows drawn with probability 1/5 and 4/5; beta* = (1, 1)
    const auto sys = make_system(DenseMatrix::from_rows({{1, 0}, {0, 2}}), {1, 2}, Regime::OverConsistent,
                                 Vector{1, 1});
    const auto dist = row_distribution(sys.X);
    double expected = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        auto s = initial_state(sys, SolverKind::RK);
        rk_update(sys, s, i);
        expected += dist.probability(i) * distance_sq(s.beta, *sys.reference);
    }
    EXPECT_NEAR(expected, 1.0, 1e-15);
    EXPECT_NEAR(expected, 2.0 * (1.0 - 5.0 / (5.0 * 2.0)), 1e-15);
}

TEST(RkStep, SatisfiesChosenRow) {
    Prng rng(1);
    const auto sys = small_consistent(rng, 8, 5);
    const Sampler smp(sys.X);
    auto s = initial_state(sys, SolverKind::RK);
    for (int t = 0; t < 200; ++t) {
        const auto d = rk_step(sys, smp, s, rng);
        const double lhs = dot(sys.X.row(d.row), s.beta);
        EXPECT_LE(std::abs(lhs - sys.y[d.row]), 1e-10 * std::max(1.0, std::abs(sys.y[d.row])));
    }
}

// --- RGS --------------------------------------------------------------------

TEST(RgsStep, IdentityExample) {
    const auto sys = make_system(DenseMatrix::identity(2), {2, 3}, Regime::OverConsistent);
    auto s = initial_state(sys, SolverKind::RGS);
    rgs_update(sys, s, 0);
    expect_vec_near(s.beta, Vector{2, 0}, 0.0);
    expect_vec_near(s.residual, Vector{0, 3}, 0.0);
}

TEST(RgsStep, SingleColumnIsGlobal) {
    const auto sys = make_system(DenseMatrix::from_rows({{1}, {1}}), {1, 3}, Regime::OverInconsistent);
    auto s = initial_state(sys, SolverKind::RGS);
    rgs_update(sys, s, 0);
    expect_vec_near(s.beta, Vector{2}, 1e-15);
}

TEST(RgsStep, ExpectedResidualErrorByEnumeration) {
    const auto sys = make_system(DenseMatrix::from_rows({{1, 0}, {0, 2}}), {1, 2}, Regime::OverConsistent,
                                 Vector{1, 1});
    const auto dist = col_distribution(sys.X);
    const auto target = matvec(sys.X, *sys.reference);
    double expected = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
        auto s = initial_state(sys, SolverKind::RGS);
        rgs_update(sys, s, j);
        expected += dist.probability(j) * distance_sq(matvec(sys.X, s.beta), target);
    }
    // column 0 (p = 1/5) leaves error 4, column 1 (p = 4/5) leaves error 1
    EXPECT_NEAR(expected, 1.6, 1e-15);
}

TEST(RgsStep, CoordinateOptimality) {
    Prng rng(2);
    const auto X = gaussian_matrix(rng, 12, 4);
    const auto sys = make_system(X, gaussian_vector(rng, 12), Regime::OverInconsistent);
    const Sampler smp(sys.X);
    auto s = initial_state(sys, SolverKind::RGS);
    for (int t = 0; t < 200; ++t) {
        const auto d = rgs_step(sys, smp, s, rng);
        const auto r = residual(sys.X, sys.y, s.beta);
        EXPECT_LE(std::abs(dot(sys.X.col(d.col), r)),
                  1e-10 * std::sqrt(sys.X.col_norm_sq(d.col)) * std::sqrt(norm_sq(r)));
    }
}

TEST(RgsStep, MaintainedResidualStaysAccurate) {
    Prng rng(3);
    const auto sys = small_consistent(rng, 40, 10);
    const Sampler smp(sys.X);
    auto s = initial_state(sys, SolverKind::RGS);
    for (int t = 0; t < 5000; ++t) {
        rgs_step(sys, smp, s, rng);
        if (t % 250 == 0) expect_vec_near(s.residual, residual(sys.X, sys.y, s.beta), 1e-8);
    }
}

// --- REK --------------------------------------------------------------------

TEST(RekStep, ColumnAnnihilation) {
    const auto sys = make_system(DenseMatrix::identity(2), {1, 1}, Regime::OverConsistent);
    auto s = initial_state(sys, SolverKind::REK);
    expect_vec_near(*s.z, Vector{1, 1}, 0.0);
    rek_update(sys, s, 0, 0);
    expect_vec_near(*s.z, Vector{0, 1}, 0.0);
}

TEST(RekStep, ZOrthogonalToChosenColumn) {
    Prng rng(4);
    const auto X = gaussian_matrix(rng, 15, 6);
    const auto sys = make_system(X, gaussian_vector(rng, 15), Regime::OverInconsistent);
    const Sampler smp(sys.X);
    auto s = initial_state(sys, SolverKind::REK);
    for (int t = 0; t < 200; ++t) {
        const auto d = rek_step(sys, smp, s, rng);
        EXPECT_LE(std::abs(dot(sys.X.col(d.col), *s.z)), 1e-10 * std::sqrt(norm_sq(*s.z)) + 1e-14);
    }
}

TEST(RekStep, ZApproachesResidualSeedEleven) {
    const auto sys = gen_gaussian({20, 5, Regime::OverInconsistent, 11});
    const Sampler smp(sys.X);
    auto s = initial_state(sys, SolverKind::REK);
    Prng rng(11);
    for (int t = 0; t < 10000; ++t) rek_step(sys, smp, s, rng);
    EXPECT_LT(std::sqrt(distance_sq(*s.z, *sys.residual_ref)), 1e-4);
}

// --- REGS -------------------------------------------------------------------

TEST(RegsStep, IdentityHandTrace) {
    const auto sys = make_system(DenseMatrix::identity(2), {2, 3}, Regime::OverConsistent, Vector{2, 3});
    auto s = initial_state(sys, SolverKind::REGS);
    regs_update(sys, s, 0, 0);
    expect_vec_near(s.beta, Vector{2, 0}, 0.0);
    expect_vec_near(*s.z, Vector{0, 0}, 0.0);
    expect_vec_near(estimate(s, SolverKind::REGS), Vector{2, 0}, 0.0);

    SolveConfig cfg;
    Prng rng(0);
    const auto tr = run(sys, SolverKind::REGS, cfg, rng);
    EXPECT_TRUE(tr.converged);
}

TEST(RegsStep, BetaLineMatchesRgsUnderSharedDraws) {
    Prng gen(5);
    const auto sys = small_consistent(gen, 6, 14);
    const Sampler smp(sys.X);
    auto a = initial_state(sys, SolverKind::RGS);
    auto b = initial_state(sys, SolverKind::REGS);
    Prng rng(6);
    for (int t = 0; t < 500; ++t) {
        const std::size_t j = smp.cols.sample(rng);
        const std::size_t i = smp.rows.sample(rng);
        rgs_update(sys, a, j);
        regs_update(sys, b, j, i);
        ASSERT_EQ(a.beta, b.beta) << "step " << t;
    }
}

TEST(RegsStep, ZOrthogonalToChosenRow) {
    Prng gen(7);
    const auto sys = small_consistent(gen, 6, 14);
    const Sampler smp(sys.X);
    auto s = initial_state(sys, SolverKind::REGS);
    Prng rng(8);
    for (int t = 0; t < 500; ++t) {
        const auto d = regs_step(sys, smp, s, rng);
        EXPECT_LE(std::abs(dot(sys.X.row(d.row), *s.z)),
                  1e-10 * std::sqrt(sys.X.row_norm_sq(d.row)) * std::sqrt(norm_sq(*s.z)) + 1e-14);
    }
}

TEST(RegsStep, UnderdeterminedOneByTwo) {
    const auto sys = make_system(DenseMatrix::from_rows({{1, 1}}), {2}, Regime::Underdetermined, Vector{1, 1});
    Prng rng(9);
    const auto tr = run(sys, SolverKind::REGS, SolveConfig{}, rng);
    EXPECT_TRUE(tr.converged);
    EXPECT_LT(tr.final_record().error_sq, 1e-6);
}

// REK with z_0 = y and REGS with z_0 = 0 are the same iteration written in
// different coordinates: under shared draws, REK's z equals REGS's residual
// y - X beta and REK's beta equals REGS's beta - z.
TEST(RegsStep, EquivalentToRekUnderSharedDraws) {
    Prng gen(10);
    const auto X = gaussian_matrix(gen, 9, 4);
    const auto sys = make_system(X, gaussian_vector(gen, 9), Regime::OverInconsistent);
    const Sampler smp(sys.X);
    auto rek = initial_state(sys, SolverKind::REK);
    auto regs = initial_state(sys, SolverKind::REGS);
    Prng r1(12), r2(12);
    for (int t = 0; t < 300; ++t) {
        const auto d1 = rek_step(sys, smp, rek, r1);
        const auto d2 = regs_step(sys, smp, regs, r2);
        ASSERT_EQ(d1.row, d2.row);
        ASSERT_EQ(d1.col, d2.col);
        expect_vec_near(rek.beta, estimate(regs, SolverKind::REGS), 1e-10);
        expect_vec_near(*rek.z, residual(sys.X, sys.y, regs.beta), 1e-10);
    }
}

// --- per-step identities on small random systems ---------------------------

TEST(Identities, RkPythagorean) {
    Prng rng(20);
    const auto sys = small_consistent(rng, 10, 4);
    const auto& ref = *sys.reference;
    const Sampler smp(sys.X);
    auto s = initial_state(sys, SolverKind::RK);
    const double start = distance_sq(s.beta, ref);
    // stop above the rounding floor, where the identity is no longer resolvable
    for (int t = 0; t < 300 && distance_sq(s.beta, ref) > 1e-12 * start; ++t) {
        const Vector prev = s.beta;
        rk_step(sys, smp, s, rng);
        const double before = distance_sq(prev, ref);
        const double after = distance_sq(s.beta, ref);
        EXPECT_NEAR(after, before - distance_sq(s.beta, prev), 1e-8 * before);
        EXPECT_LE(after, before * (1 + 1e-8));
    }
}

TEST(Identities, RgsPythagoreanInconsistent) {
    Prng rng(21);
    const auto X = gaussian_matrix(rng, 10, 4);
    const auto y = gaussian_vector(rng, 10);
    const auto sys = make_system(X, y, Regime::OverInconsistent);
    const auto target = matvec(sys.X, least_squares_ref(sys.X, sys.y));
    const Sampler smp(sys.X);
    auto s = initial_state(sys, SolverKind::RGS);
    const double start = distance_sq(matvec(sys.X, s.beta), target);
    for (int t = 0; t < 300 && distance_sq(matvec(sys.X, s.beta), target) > 1e-12 * start; ++t) {
        const Vector prev = matvec(sys.X, s.beta);
        rgs_step(sys, smp, s, rng);
        const Vector now = matvec(sys.X, s.beta);
        const double before = distance_sq(prev, target);
        EXPECT_NEAR(distance_sq(now, target), before - distance_sq(now, prev), 1e-8 * before);
    }
}

TEST(Identities, OneStepExpectationRk) {
    Prng rng(22);
    for (int sys_k = 0; sys_k < 5; ++sys_k) {
        const auto sys = small_consistent(rng, 6, 3);
        const auto M = to_oracle(sys.X);
        const auto& ref = *sys.reference;
        for (int k = 0; k < 10; ++k) {
            const auto beta = gaussian_vector(rng, 3);
            const Vector d = subtract(beta, ref);
            const double formula =
                norm_sq(d) * (1.0 - norm_sq(matvec(sys.X, d)) / (sys.X.frob_sq() * norm_sq(d)));
            EXPECT_NEAR(oracle::expected_rk_error(M, sys.y, beta, ref), formula, 1e-12 * std::max(1.0, formula));
        }
    }
}

TEST(Identities, RowSpanInvarianceRkRek) {
    Prng rng(23);
    const auto sys = small_consistent(rng, 5, 12);
    const RowSpanProjector P(sys.X);
    const Sampler smp(sys.X);
    for (SolverKind k : {SolverKind::RK, SolverKind::REK}) {
        auto s = initial_state(sys, k);
        for (int t = 0; t < 500; ++t) {
            step(k, sys, smp, s, rng);
            EXPECT_LE(std::sqrt(norm_sq(P.complement(s.beta))), 1e-8 * std::sqrt(norm_sq(s.beta)));
        }
    }
}

TEST(Identities, RegsDecomposition) {
    Prng rng(24);
    const auto sys = small_consistent(rng, 5, 12);
    const auto& ref = *sys.reference;
    const Sampler smp(sys.X);
    auto s = initial_state(sys, SolverKind::REGS);
    for (int t = 0; t < 500; ++t) {
        const Vector prev_est = estimate(s, SolverKind::REGS);
        const auto d = regs_step(sys, smp, s, rng);
        const Vector e_prev = subtract(prev_est, ref);
        const Vector e_beta = subtract(s.beta, ref);
        const Vector pe = apply_row_projector(sys.X, d.row, e_prev);
        const Vector comp = subtract(e_beta, apply_row_projector(sys.X, d.row, e_beta));
        const double lhs = estimate_error_sq(s, SolverKind::REGS, ref);
        const double rhs = norm_sq(pe) + norm_sq(comp);
        EXPECT_NEAR(lhs, rhs, 1e-8 * std::max(lhs, rhs));
    }
}

// --- driver -----------------------------------------------------------------

TEST(Run, RkConvergesOverConsistentSeedOne) {
    const auto sys = gen_gaussian({500, 50, Regime::OverConsistent, 1});
    Prng rng = spawn_trial_rng(1, 0);
    SolveConfig cfg;
    cfg.record_every = 1000;
    const auto tr = run(sys, SolverKind::RK, cfg, rng);
    EXPECT_TRUE(tr.converged);
    EXPECT_LT(tr.final_record().error_sq, 1e-6);
    EXPECT_LE(tr.final_iteration, 100000u);
}

TEST(Run, RkStallsOverInconsistentSeedOne) {
    const auto sys = gen_gaussian({500, 50, Regime::OverInconsistent, 1});
    Prng rng = spawn_trial_rng(1, 0);
    SolveConfig cfg;
    cfg.record_every = 1000;
    const auto tr = run(sys, SolverKind::RK, cfg, rng);
    EXPECT_FALSE(tr.converged);
    EXPECT_GT(tr.final_record().error_sq, 10 * cfg.tol);
}

TEST(Run, RgsUnderdeterminedWrongLimitSeedOne) {
    const auto sys = gen_gaussian({50, 500, Regime::Underdetermined, 1});
    Prng rng = spawn_trial_rng(1, 0);
    SolveConfig cfg;
    cfg.stop_metric = StopMetric::ResidualNorm;
    cfg.record_every = 1000;
    const auto tr = run(sys, SolverKind::RGS, cfg, rng);
    EXPECT_TRUE(tr.converged);
    EXPECT_LT(tr.final_record().residual_sq, 1e-6);
    EXPECT_GT(tr.final_record().error_sq, 1e3 * cfg.tol);
}

TEST(Run, RecordsStrictlyIncreasing) {
    Prng rng(30);
    const auto sys = small_consistent(rng, 20, 5);
    SolveConfig cfg;
    cfg.record_every = 7;
    cfg.max_iter = 100;
    cfg.tol = 1e-300;
    const auto tr = run(sys, SolverKind::REK, cfg, rng);
    ASSERT_FALSE(tr.records.empty());
    EXPECT_EQ(tr.records.front().iteration, 0u);
    EXPECT_EQ(tr.records.back().iteration, 100u);
    for (std::size_t k = 1; k < tr.records.size(); ++k) {
        EXPECT_LT(tr.records[k - 1].iteration, tr.records[k].iteration);
        EXPECT_GE(tr.records[k].error_sq, 0.0);
        EXPECT_GE(tr.records[k].residual_sq, 0.0);
    }
}

TEST(Run, MissingReferenceIsConfigError) {
    const auto sys = make_system(DenseMatrix::identity(2), {1, 1}, Regime::OverConsistent);
    Prng rng(0);
    EXPECT_THROW(run(sys, SolverKind::RK, SolveConfig{}, rng), ConfigError);
    SolveConfig cfg;
    cfg.stop_metric = StopMetric::ResidualNorm;
    EXPECT_NO_THROW(run(sys, SolverKind::RK, cfg, rng));
}

TEST(Run, ZeroRightHandSideReturnsImmediately) {
    const auto sys = make_system(DenseMatrix::identity(2), {0, 0}, Regime::OverConsistent, Vector{0, 0});
    Prng rng(0);
    for (SolverKind k : kAllSolvers) {
        const auto tr = run(sys, k, SolveConfig{}, rng);
        EXPECT_TRUE(tr.converged);
        EXPECT_EQ(tr.final_iteration, 0u);
        EXPECT_EQ(tr.records.size(), 1u);
    }
}

TEST(Run, InvalidConfig) {
    const auto sys = make_system(DenseMatrix::identity(2), {1, 1}, Regime::OverConsistent, Vector{1, 1});
    Prng rng(0);
    SolveConfig cfg;
    cfg.tol = 0.0;
    EXPECT_THROW(run(sys, SolverKind::RK, cfg, rng), ConfigError);
    cfg = SolveConfig{};
    cfg.record_every = 0;
    EXPECT_THROW(run(sys, SolverKind::RK, cfg, rng), ConfigError);
}

TEST(Run, ParseNames) {
    EXPECT_EQ(parse_solver_kind("regs"), SolverKind::REGS);
    EXPECT_EQ(parse_solver_kind("Rk"), SolverKind::RK);
    EXPECT_THROW(parse_solver_kind("cg"), ConfigError);
    EXPECT_EQ(parse_stop_metric("residual"), StopMetric::ResidualNorm);
    EXPECT_THROW(parse_stop_metric("nope"), ConfigError);
}
