#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace drgd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when a factorization meets a structurally or numerically singular matrix.
class SingularMatrixError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Triplet {
    std::int64_t row;
    std::int64_t col;
    double value;
};

/// Row-compressed sparse matrix.
///
/// Column indices are strictly increasing within each row, so duplicate
/// entries cannot be represented; the triplet constructor rejects them.
/// Instances are immutable once built.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::int64_t nrows, std::int64_t ncols,
                 std::vector<std::int64_t> offsets,
                 std::vector<std::int64_t> indices,
                 std::vector<double> values);

    static SparseMatrix from_triplets(std::int64_t nrows, std::int64_t ncols,
                                      std::vector<Triplet> entries);
    static SparseMatrix from_dense(const Matrix& dense, double drop_tol = 0.0);
    static SparseMatrix identity(std::int64_t n);
    static SparseMatrix zero(std::int64_t nrows, std::int64_t ncols);

    std::int64_t rows() const { return nrows_; }
    std::int64_t cols() const { return ncols_; }
    std::int64_t nnz() const { return static_cast<std::int64_t>(values_.size()); }

    const std::vector<std::int64_t>& offsets() const { return offsets_; }
    const std::vector<std::int64_t>& indices() const { return indices_; }
    const std::vector<double>& values() const { return values_; }

    /// Entry lookup by binary search within the row; zero when not stored.
    double coeff(std::int64_t row, std::int64_t col) const;

    SparseMatrix transpose() const;
    Matrix to_dense() const;

    /// Same shape and sparsity pattern with replacement values.
    SparseMatrix with_values(std::vector<double> values) const;

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    std::int64_t nrows_ = 0;
    std::int64_t ncols_ = 0;
    std::vector<std::int64_t> offsets_{0};
    std::vector<std::int64_t> indices_;
    std::vector<double> values_;
};

Vector spmv(const SparseMatrix& a, const Vector& x);
Vector spmv_t(const SparseMatrix& a, const Vector& x);

// Allocation-free variants used in solver inner loops. `out` is resized.
void spmv_into(const SparseMatrix& a, const Vector& x, Vector& out);
void spmv_t_into(const SparseMatrix& a, const Vector& x, Vector& out);

/// Column-wise products for (rows x d) blocks: A * X and A^T * X.
Matrix spmm(const SparseMatrix& a, const Matrix& x);
Matrix spmm_t(const SparseMatrix& a, const Matrix& x);

/// Reusable LU factorization of a square nonsingular sparse matrix.
///
/// Copies share the underlying factors. `solve` is const and re-entrant.
class Factorization {
public:
    Vector solve(const Vector& b) const;
    std::int64_t size() const { return n_; }

    friend Factorization factorize(const SparseMatrix& a);

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
    std::int64_t n_ = 0;
};

Factorization factorize(const SparseMatrix& a);

struct SpectralEstimate {
    double sigma_max = 0.0;
    std::int64_t iterations_used = 0;
    bool converged = false;
};

/// Largest singular value by power iteration on A^T A.
///
/// The start vector is drawn from a fixed-seed generator so that repeated
/// calls return identical estimates. `tol` bounds the relative change of the
/// eigenvalue estimate between sweeps.
SpectralEstimate estimate_sigma_max(const SparseMatrix& a, double tol = 1e-10,
                                    std::int64_t max_iter = 20000,
                                    std::uint64_t seed = 0);

}  // namespace drgd
