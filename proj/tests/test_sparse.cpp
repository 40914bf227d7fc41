#include <doctest.h>

#include <Eigen/SVD>

#include "drgd/sparse.hpp"
#include "helpers.hpp"

using namespace drgd;

namespace {

SparseMatrix two_by_two() {
    return SparseMatrix::from_triplets(2, 2, {{0, 0, 1}, {0, 1, 2}, {1, 0, 3}, {1, 1, 4}});
}

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST_CASE("construction validates CSR invariants") {
    CHECK_THROWS_AS(SparseMatrix(2, 2, {0, 1}, {0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(SparseMatrix(1, 2, {0, 2}, {1, 0}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(SparseMatrix(1, 2, {0, 1}, {2}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(SparseMatrix(1, 2, {0, 1}, {0}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{0, 0, 1}, {0, 0, 2}}), std::invalid_argument);
    CHECK_NOTHROW(SparseMatrix(2, 3, {0, 1, 1}, {2}, {1.0}));
}

TEST_CASE("spmv examples") {
    CHECK(spmv(SparseMatrix::identity(3), vec({1, 2, 3})) == vec({1, 2, 3}));
    CHECK(spmv(SparseMatrix::zero(3, 2), vec({4, 5})) == Vector::Zero(3));
    CHECK(spmv(two_by_two(), vec({1, 1})) == vec({3, 7}));
    CHECK_THROWS_AS(spmv(two_by_two(), vec({1, 1, 1})), std::invalid_argument);
}

TEST_CASE("spmv_t examples and dense oracle") {
    const Vector x = vec({3, -1, 2});
    CHECK(spmv_t(SparseMatrix::identity(3), x) == x);
    CHECK(spmv_t(two_by_two(), vec({1, 1})) == vec({4, 6}));
    CHECK_THROWS_AS(spmv_t(two_by_two(), vec({1})), std::invalid_argument);

    std::mt19937_64 rng(3);
    const SparseMatrix a = testutil::random_sparse(rng, 5, 3);
    const Vector y = testutil::random_vector(rng, 5);
    const Vector dense = a.to_dense().transpose() * y;
    CHECK((spmv_t(a, y) - dense).norm() <= 1e-14 * (1.0 + dense.norm()));
    CHECK(spmv_t(a, y) == spmv(a.transpose(), y));
}

TEST_CASE("adjoint identity on random matrices") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const SparseMatrix a = testutil::random_sparse(rng, 7, 4);
        const Vector x = testutil::random_vector(rng, 4);
        const Vector y = testutil::random_vector(rng, 7);
        const double lhs = spmv_t(a, y).dot(x);
        const double rhs = y.dot(spmv(a, x));
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("spmm matches per-column spmv bitwise") {
    std::mt19937_64 rng(5);
    const SparseMatrix a = testutil::random_sparse(rng, 6, 4);
    const Matrix x = testutil::random_matrix(rng, 4, 3);
    const Matrix y = testutil::random_matrix(rng, 6, 3);
    const Matrix ax = spmm(a, x);
    const Matrix aty = spmm_t(a, y);
    for (int j = 0; j < 3; ++j) {
        CHECK(Vector(ax.col(j)) == spmv(a, x.col(j)));
        CHECK(Vector(aty.col(j)) == spmv_t(a, y.col(j)));
    }
}

TEST_CASE("factorize and solve") {
    CHECK(factorize(SparseMatrix::identity(2)).solve(vec({5, -2})) == vec({5, -2}));
    const SparseMatrix d = SparseMatrix::from_triplets(2, 2, {{0, 0, 2}, {1, 1, 4}});
    CHECK((factorize(d).solve(vec({2, 8})) - vec({1, 2})).norm() <= 1e-15);

    std::mt19937_64 rng(8);
    Matrix dense = testutil::random_matrix(rng, 8, 8);
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) {
            if ((i + 2 * j) % 3 == 0 && i != j) dense(i, j) = 0.0;
        }
        dense(i, i) += 10.0;
    }
    const SparseMatrix a = SparseMatrix::from_dense(dense);
    const Factorization f = factorize(a);
    for (int trial = 0; trial < 5; ++trial) {
        const Vector b = testutil::random_vector(rng, 8);
        const Vector x = f.solve(b);
        CHECK((spmv(a, x) - b).norm() / std::max(1.0, b.norm()) <= 1e-10);
        const Vector x_true = testutil::random_vector(rng, 8);
        CHECK((f.solve(spmv(a, x_true)) - x_true).norm() <= 1e-8 * x_true.norm());
    }
}

TEST_CASE("singular matrices are rejected") {
    const SparseMatrix empty_row = SparseMatrix::from_triplets(2, 2, {{0, 0, 1}, {0, 1, 1}});
    CHECK_THROWS_AS(factorize(empty_row), SingularMatrixError);
    const SparseMatrix rank_one =
        SparseMatrix::from_triplets(2, 2, {{0, 0, 1}, {0, 1, 2}, {1, 0, 2}, {1, 1, 4}});
    CHECK_THROWS_AS(factorize(rank_one), SingularMatrixError);
    CHECK_THROWS_AS(factorize(SparseMatrix::zero(2, 3)), std::invalid_argument);
}

TEST_CASE("spectral estimate") {
    CHECK(estimate_sigma_max(SparseMatrix::identity(4)).sigma_max == doctest::Approx(1.0).epsilon(1e-12));
    const SparseMatrix d = SparseMatrix::from_triplets(2, 2, {{0, 0, 1}, {1, 1, 3}});
    CHECK(estimate_sigma_max(d).sigma_max == doctest::Approx(3.0).epsilon(1e-8));

    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix dense = testutil::random_matrix(rng, 10, 10);
        const SparseMatrix a = SparseMatrix::from_dense(dense);
        const auto est = estimate_sigma_max(a, 1e-12, 200000);
        const double truth = Eigen::JacobiSVD<Matrix>(dense).singularValues()[0];
        CHECK(est.converged);
        CHECK(std::abs(est.sigma_max - truth) <= 1e-4);
        // Upper-bound character: no probe exceeds the estimate.
        for (int p = 0; p < 20; ++p) {
            const Vector x = testutil::random_vector(rng, 10);
            CHECK(spmv(a, x).norm() / x.norm() <= est.sigma_max + 1e-10);
        }
    }
    // Same seed, same answer.
    const SparseMatrix a = testutil::random_sparse(rng, 6, 6);
    CHECK(estimate_sigma_max(a).sigma_max == estimate_sigma_max(a).sigma_max);
    CHECK_THROWS_AS(estimate_sigma_max(a, 0.0), std::invalid_argument);
    const auto capped = estimate_sigma_max(testutil::random_sparse(rng, 30, 30), 1e-300, 3);
    CHECK_FALSE(capped.converged);
    CHECK(capped.iterations_used == 3);
}
