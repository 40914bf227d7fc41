#include <doctest.h>

#include "drgd/solvers.hpp"
#include "helpers.hpp"

using namespace drgd;

namespace {

MonotoneData one_var() { return assemble_inclusion(to_conic(testutil::one_var_qp()).qp); }

SolverConfig fixed_step(double eta) {
    SolverConfig cfg;
    cfg.step_mode = StepMode::fixed;
    cfg.fixed_eta = eta;
    return cfg;
}

}  // namespace

TEST_CASE("SolverConfig validation") {
    SolverConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.wolfe_c1 = 0.6;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SolverConfig{};
    cfg.tol_fixed_point = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SolverConfig{};
    cfg.steps_per_iter = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_THROWS_AS(fixed_step(0.0).validate(), std::invalid_argument);
}

TEST_CASE("DR on the one-variable QP reaches the closed-form KKT point") {
    const auto d = one_var();
    SolverConfig cfg;
    cfg.tol_fixed_point = 1e-10;
    const auto rep = dr_solve(d, cfg);
    REQUIRE(rep.status == SolveStatus::converged);
    CHECK(rep.x[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(rep.y[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(rep.final_residual <= 1e-10);

    const auto gd = drgd_solve(d, cfg);
    REQUIRE(gd.status == SolveStatus::converged);
    CHECK(std::abs(gd.x[0] - 1.0) <= 1e-4);
    CHECK(std::abs(gd.y[0] - 1.0) <= 1e-4);
}

TEST_CASE("unconstrained problem converges to zero") {
    StandardQP qp = testutil::one_var_qp();
    qp.l[0] = -kInf;
    const auto d = assemble_inclusion(to_conic(qp).qp);
    CHECK(d.m == 0);
    const auto rep = dr_solve(d, SolverConfig{});
    CHECK(rep.status == SolveStatus::converged);
    CHECK(std::abs(rep.x[0]) <= 1e-6);
}

TEST_CASE("iteration limit returns the best iterate") {
    const auto d = testutil::random_data(3, 8, 3, 3);
    SolverConfig cfg;
    cfg.max_iter = 5;
    cfg.tol_fixed_point = 1e-14;
    cfg.record_history = true;
    const auto rep = dr_solve(d, cfg);
    CHECK(rep.status == SolveStatus::max_iter);
    CHECK(rep.iterations == 5);
    CHECK(rep.residual_history.size() == 5);
}

TEST_CASE("divergence is reported as an error") {
    const auto d = testutil::random_data(4, 8, 3, 3);
    auto cfg = fixed_step(1.0);
    cfg.safeguard_rho = 0.99;
    // Bypass the cap by shrinking sigma_max artificially.
    MonotoneData broken = d;
    broken.sigma_max = 1e-3;
    cfg.fixed_eta = 50.0;
    cfg.max_iter = 10000;
    const auto rep = drgd_solve(broken, cfg);
    CHECK(rep.status == SolveStatus::error);
    CHECK(rep.message.find("divergence") != std::string::npos);
}

TEST_CASE("w-update identity and cone membership every iteration") {
    const auto d = testutil::random_data(5, 8, 3, 3);
    IterateState dr = cold_state(d);
    IterateState gd = cold_state(d);
    DrStepper a(d);
    DrgdStepper b(d, SolverConfig{});
    const auto off = nonneg_offset(d.n, d.cone);
    for (int k = 0; k < 200; ++k) {
        for (auto* s : {&dr, &gd}) {
            const Vector w_prev = s->w;
            if (s == &dr) a.step(*s); else b.step(*s);
            const Vector expect = w_prev + (s->u - s->u_tilde);
            CHECK(s->w == expect);
            CHECK(s->u.tail(d.dim() - off).minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("exact line-search step") {
    ConicQP trivial;
    trivial.P = SparseMatrix::zero(2, 2);
    trivial.c = Vector::Zero(2);
    trivial.A = SparseMatrix::zero(0, 2);
    trivial.b = Vector(0);
    const auto id = assemble_inclusion(trivial);
    CHECK(exact_linesearch_step(Vector::Ones(2), id) == 1.0);

    ConicQP diag = trivial;
    diag.P = SparseMatrix::identity(2);
    const auto d2 = assemble_inclusion(diag);
    Vector t(2);
    t << 1, 0;
    CHECK(exact_linesearch_step(t, d2) == doctest::Approx(0.25));
    CHECK_THROWS_AS(exact_linesearch_step(Vector::Zero(2), d2), std::invalid_argument);

    // 1-D scan: the exact step is never beaten.
    const auto d = testutil::random_data(6, 8, 3, 3);
    std::mt19937_64 rng(6);
    const Vector w = testutil::random_vector(rng, d.dim());
    const Vector ut = testutil::random_vector(rng, d.dim());
    const Vector g = lsq_gradient(d, w, ut);
    const double eta = exact_linesearch_step(g, d);
    const double best = lsq_objective(d, w, ut - eta * g);
    std::uniform_real_distribution<double> unif(0.0, 3.0 * eta);
    for (int i = 0; i < 50; ++i) {
        CHECK(best <= lsq_objective(d, w, ut - unif(rng) * g) + 1e-12 * (1.0 + best));
    }
}

TEST_CASE("Wolfe check") {
    const auto d = testutil::random_data(7, 8, 3, 3);
    std::mt19937_64 rng(7);
    const Vector w = testutil::random_vector(rng, d.dim());
    const Vector ut = testutil::random_vector(rng, d.dim());
    const Vector g = lsq_gradient(d, w, ut);

    const double eta = exact_linesearch_step(g, d);
    const auto exact = wolfe_check(d, w, ut, ut - eta * g, eta, 1e-4, 0.9);
    CHECK(exact.passed());

    const auto zero = wolfe_check(d, w, ut, ut, 0.0, 1e-4, 0.9);
    CHECK(zero.sufficient_decrease);
    CHECK(zero.decrease == 0.0);
    // A zero step never satisfies the curvature condition.
    CHECK_FALSE(zero.curvature);

    const double big = 100.0 * safeguard_cap(d);
    const auto too_far = wolfe_check(d, w, ut, ut - big * g, big, 1e-4, 0.9);
    CHECK_FALSE(too_far.sufficient_decrease);
}

TEST_CASE("operator form matches the fixed-step iteration") {
    std::mt19937_64 rng(8);
    const auto d = testutil::random_data(8, 6, 2, 2);
    const double eta = 0.5 * safeguard_cap(d);
    const DrgdStepper stepper(d, fixed_step(eta));
    for (int i = 0; i < 100; ++i) {
        IterateState s = testutil::random_state(d, rng);
        const Vector expected = dr_operator_apply(d, eta, s.u_tilde, s.w);
        stepper.step(s);
        CHECK((s.w - expected).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
}

TEST_CASE("operator form with C the whole space") {
    // n = 2, no constraints: T(w) = w + Phi(w) - w.
    ConicQP cqp;
    cqp.P = SparseMatrix::from_triplets(2, 2, {{0, 0, 2.0}, {1, 1, 0.5}});
    cqp.c = Vector(2);
    cqp.c << 1.0, -1.0;
    cqp.A = SparseMatrix::zero(0, 2);
    cqp.b = Vector(0);
    const auto d = assemble_inclusion(cqp);
    Vector ut(2), w(2);
    ut << 0.3, -0.7;
    w << 1.5, 2.0;
    const double eta = 0.1;
    // B = diag(3, 1.5); Phi = ut - eta B^2 ut + eta B (w - q).
    Vector phi(2);
    phi << 0.3 - 0.1 * 9.0 * 0.3 + 0.1 * 3.0 * (1.5 - 1.0),
        -0.7 - 0.1 * 2.25 * -0.7 + 0.1 * 1.5 * (2.0 + 1.0);
    CHECK((dr_operator_apply(d, eta, ut, w) - phi).norm() <= 1e-14);
    CHECK((gradient_step_map(d, eta, ut, w) - phi).norm() <= 1e-14);
}

TEST_CASE("operator form with zero step") {
    const auto d = testutil::random_data(9, 5, 1, 2);
    std::mt19937_64 rng(9);
    const Vector ut = testutil::random_vector(rng, d.dim());
    const Vector w = testutil::random_vector(rng, d.dim());
    const Vector expected = w + project_cone_dual(2.0 * ut - w, d.n, d.cone) - ut;
    CHECK((dr_operator_apply(d, 0.0, ut, w) - expected).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("reflected gradient map is nonexpansive under the cap") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto d = testutil::random_data(100 + seed, 8, 3, 3);
        std::mt19937_64 rng(seed);
        const double eta = safeguard_cap(d);
        const Vector ut = testutil::random_vector(rng, d.dim());
        for (int i = 0; i < 100; ++i) {
            const Vector w1 = testutil::random_vector(rng, d.dim());
            const Vector w2 = testutil::random_vector(rng, d.dim());
            const double lhs =
                (reflected_gradient_map(d, eta, ut, w1) - reflected_gradient_map(d, eta, ut, w2)).norm();
            CHECK(lhs <= (w1 - w2).norm() * (1.0 + 1e-10));
        }
    }
}

TEST_CASE("warm start from a solution") {
    const auto d = one_var();
    Vector x = Vector::Ones(1), y = Vector::Ones(1);
    const auto s = warm_start_from_solution(d, x, y);
    const auto rep = dr_solve(d, SolverConfig{}, s);
    CHECK(rep.status == SolveStatus::converged);
    CHECK(rep.iterations <= 3);

    const auto zero = warm_start_from_solution(d, Vector::Zero(1), Vector::Zero(1));
    CHECK(zero.w == d.q);

    const auto rd = testutil::random_data(10, 8, 3, 3);
    std::mt19937_64 rng(10);
    const Vector uh = testutil::random_vector(rng, rd.dim());
    const auto ws = warm_start_from_solution(rd, uh.head(rd.n), uh.tail(rd.m));
    CHECK((factorize(rd.I_plus_M).solve(ws.w - rd.q) - uh).norm() <= 1e-10 * std::max(1.0, uh.norm()));
    CHECK_THROWS_AS(warm_start_from_solution(rd, Vector::Zero(1), Vector::Zero(1)), std::invalid_argument);
}

TEST_CASE("solutions satisfy KKT to a multiple of the tolerance") {
    for (const auto& d : testutil::qp_rhs_instances(10, 5, 1)) {
        SolverConfig cfg;
        const auto dr = dr_solve(d, cfg);
        const auto gd = drgd_solve(d, cfg);
        REQUIRE(dr.status == SolveStatus::converged);
        REQUIRE(gd.status == SolveStatus::converged);
        for (const auto* r : {&dr, &gd}) {
            CHECK(r->metrics.dual_residual_inf <= 100 * cfg.tol_fixed_point);
            CHECK(r->metrics.max_viol() <= 100 * cfg.tol_fixed_point);
        }
        CHECK(std::abs(dr.metrics.objective - gd.metrics.objective) <= 1e-3);
    }
}

TEST_CASE("more gradient steps never cost more iterations (2% slack)") {
    for (const auto& d : testutil::qp_rhs_instances(10, 3, 2)) {
        std::int64_t prev = std::numeric_limits<std::int64_t>::max();
        for (int steps : {1, 2, 5, 10}) {
            SolverConfig cfg;
            cfg.steps_per_iter = steps;
            const auto r = drgd_solve(d, cfg);
            REQUIRE(r.status == SolveStatus::converged);
            CHECK(static_cast<double>(r.iterations) <= 1.02 * static_cast<double>(prev));
            prev = r.iterations;
        }
    }
}

TEST_CASE("step sizes never exceed the cap") {
    const auto d = testutil::random_data(11, 8, 3, 3);
    SolverConfig cfg;
    cfg.record_history = true;
    cfg.steps_per_iter = 3;
    const auto r = drgd_solve(d, cfg);
    CHECK(r.step_sizes.size() == static_cast<std::size_t>(3 * r.iterations));
    for (double eta : r.step_sizes) CHECK(eta <= safeguard_cap(d) * (1 + 1e-15));
}
