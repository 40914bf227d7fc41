#include "drgd/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace drgd {

namespace {

[[noreturn]] void dimension_error(const std::string& what, std::int64_t expected,
                                  std::int64_t got) {
    std::ostringstream os;
    os << what << ": dimension mismatch (expected " << expected << ", got " << got
       << ")";
    throw std::invalid_argument(os.str());
}

}  // namespace

SparseMatrix::SparseMatrix(std::int64_t nrows, std::int64_t ncols,
                           std::vector<std::int64_t> offsets,
                           std::vector<std::int64_t> indices,
                           std::vector<double> values)
    : nrows_(nrows),
      ncols_(ncols),
      offsets_(std::move(offsets)),
      indices_(std::move(indices)),
      values_(std::move(values)) {
    if (nrows_ < 0 || ncols_ < 0) {
        throw std::invalid_argument("SparseMatrix: negative dimension");
    }
    if (static_cast<std::int64_t>(offsets_.size()) != nrows_ + 1) {
        throw std::invalid_argument("SparseMatrix: offsets must have nrows+1 entries");
    }
    if (offsets_.front() != 0) {
        throw std::invalid_argument("SparseMatrix: offsets must start at 0");
    }
    if (indices_.size() != values_.size() ||
        offsets_.back() != static_cast<std::int64_t>(values_.size())) {
        throw std::invalid_argument("SparseMatrix: value count must equal last offset");
    }
    for (std::int64_t r = 0; r < nrows_; ++r) {
        if (offsets_[r + 1] < offsets_[r]) {
            throw std::invalid_argument("SparseMatrix: offsets must be non-decreasing");
        }
        for (std::int64_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
            const auto col = indices_[k];
            if (col < 0 || col >= ncols_) {
                throw std::invalid_argument("SparseMatrix: column index out of range");
            }
            if (k > offsets_[r] && col <= indices_[k - 1]) {
                throw std::invalid_argument(
                    "SparseMatrix: column indices must be strictly increasing per row "
                    "(duplicate entry?)");
            }
        }
    }
}

SparseMatrix SparseMatrix::from_triplets(std::int64_t nrows, std::int64_t ncols,
                                         std::vector<Triplet> entries) {
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::int64_t> offsets(nrows + 1, 0);
    std::vector<std::int64_t> indices;
    std::vector<double> values;
    indices.reserve(entries.size());
    values.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& e = entries[k];
        if (e.row < 0 || e.row >= nrows || e.col < 0 || e.col >= ncols) {
            throw std::invalid_argument("SparseMatrix: triplet out of range");
        }
        if (k > 0 && e.row == entries[k - 1].row && e.col == entries[k - 1].col) {
            std::ostringstream os;
            os << "SparseMatrix: duplicate entry at (" << e.row << ", " << e.col << ")";
            throw std::invalid_argument(os.str());
        }
        ++offsets[e.row + 1];
        indices.push_back(e.col);
        values.push_back(e.value);
    }
    for (std::int64_t r = 0; r < nrows; ++r) offsets[r + 1] += offsets[r];
    return SparseMatrix(nrows, ncols, std::move(offsets), std::move(indices),
                        std::move(values));
}

SparseMatrix SparseMatrix::from_dense(const Matrix& dense, double drop_tol) {
    std::vector<Triplet> entries;
    for (Eigen::Index i = 0; i < dense.rows(); ++i) {
        for (Eigen::Index j = 0; j < dense.cols(); ++j) {
            if (std::abs(dense(i, j)) > drop_tol) entries.push_back({i, j, dense(i, j)});
        }
    }
    return from_triplets(dense.rows(), dense.cols(), std::move(entries));
}

SparseMatrix SparseMatrix::identity(std::int64_t n) {
    std::vector<std::int64_t> offsets(n + 1);
    std::vector<std::int64_t> indices(n);
    for (std::int64_t i = 0; i <= n; ++i) offsets[i] = i;
    for (std::int64_t i = 0; i < n; ++i) indices[i] = i;
    return SparseMatrix(n, n, std::move(offsets), std::move(indices),
                        std::vector<double>(n, 1.0));
}

SparseMatrix SparseMatrix::zero(std::int64_t nrows, std::int64_t ncols) {
    return SparseMatrix(nrows, ncols, std::vector<std::int64_t>(nrows + 1, 0), {}, {});
}

double SparseMatrix::coeff(std::int64_t row, std::int64_t col) const {
    const auto first = indices_.begin() + offsets_[row];
    const auto last = indices_.begin() + offsets_[row + 1];
    const auto it = std::lower_bound(first, last, col);
    if (it == last || *it != col) return 0.0;
    return values_[it - indices_.begin()];
}

SparseMatrix SparseMatrix::transpose() const {
    std::vector<std::int64_t> offsets(ncols_ + 1, 0);
    for (auto c : indices_) ++offsets[c + 1];
    for (std::int64_t c = 0; c < ncols_; ++c) offsets[c + 1] += offsets[c];
    std::vector<std::int64_t> next(offsets.begin(), offsets.end() - 1);
    std::vector<std::int64_t> indices(indices_.size());
    std::vector<double> values(values_.size());
    // Rows are visited in order, so each transposed row receives increasing columns.
    for (std::int64_t r = 0; r < nrows_; ++r) {
        for (std::int64_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
            const auto dst = next[indices_[k]]++;
            indices[dst] = r;
            values[dst] = values_[k];
        }
    }
    return SparseMatrix(ncols_, nrows_, std::move(offsets), std::move(indices),
                        std::move(values));
}

Matrix SparseMatrix::to_dense() const {
    Matrix dense = Matrix::Zero(nrows_, ncols_);
    for (std::int64_t r = 0; r < nrows_; ++r) {
        for (std::int64_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
            dense(r, indices_[k]) = values_[k];
        }
    }
    return dense;
}

SparseMatrix SparseMatrix::with_values(std::vector<double> values) const {
    if (values.size() != values_.size()) {
        dimension_error("SparseMatrix::with_values", nnz(),
                        static_cast<std::int64_t>(values.size()));
    }
    return SparseMatrix(nrows_, ncols_, offsets_, indices_, std::move(values));
}

void spmv_into(const SparseMatrix& a, const Vector& x, Vector& out) {
    if (x.size() != a.cols()) dimension_error("spmv", a.cols(), x.size());
    out.resize(a.rows());
    const auto& off = a.offsets();
    const auto& idx = a.indices();
    const auto& val = a.values();
    for (std::int64_t r = 0; r < a.rows(); ++r) {
        double acc = 0.0;
        for (std::int64_t k = off[r]; k < off[r + 1]; ++k) acc += val[k] * x[idx[k]];
        out[r] = acc;
    }
}

void spmv_t_into(const SparseMatrix& a, const Vector& x, Vector& out) {
    if (x.size() != a.rows()) dimension_error("spmv_t", a.rows(), x.size());
    out.setZero(a.cols());
    const auto& off = a.offsets();
    const auto& idx = a.indices();
    const auto& val = a.values();
    for (std::int64_t r = 0; r < a.rows(); ++r) {
        const double xr = x[r];
        for (std::int64_t k = off[r]; k < off[r + 1]; ++k) out[idx[k]] += val[k] * xr;
    }
}

Vector spmv(const SparseMatrix& a, const Vector& x) {
    Vector out;
    spmv_into(a, x, out);
    return out;
}

Vector spmv_t(const SparseMatrix& a, const Vector& x) {
    Vector out;
    spmv_t_into(a, x, out);
    return out;
}

Matrix spmm(const SparseMatrix& a, const Matrix& x) {
    if (x.rows() != a.cols()) dimension_error("spmm", a.cols(), x.rows());
    Matrix out(a.rows(), x.cols());
    const auto& off = a.offsets();
    const auto& idx = a.indices();
    const auto& val = a.values();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double* xj = x.col(j).data();
        double* oj = out.col(j).data();
        for (std::int64_t r = 0; r < a.rows(); ++r) {
            double acc = 0.0;
            for (std::int64_t k = off[r]; k < off[r + 1]; ++k) acc += val[k] * xj[idx[k]];
            oj[r] = acc;
        }
    }
    return out;
}

Matrix spmm_t(const SparseMatrix& a, const Matrix& x) {
    if (x.rows() != a.rows()) dimension_error("spmm_t", a.rows(), x.rows());
    Matrix out = Matrix::Zero(a.cols(), x.cols());
    const auto& off = a.offsets();
    const auto& idx = a.indices();
    const auto& val = a.values();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double* xj = x.col(j).data();
        double* oj = out.col(j).data();
        for (std::int64_t r = 0; r < a.rows(); ++r) {
            const double xr = xj[r];
            for (std::int64_t k = off[r]; k < off[r + 1]; ++k) oj[idx[k]] += val[k] * xr;
        }
    }
    return out;
}

struct Factorization::Impl {
    Eigen::SparseLU<Eigen::SparseMatrix<double, Eigen::ColMajor>, Eigen::COLAMDOrdering<int>> lu;
};

Factorization factorize(const SparseMatrix& a) {
    if (a.rows() != a.cols()) dimension_error("factorize (square required)", a.rows(), a.cols());
    const auto n = a.rows();
    // An empty row or column can never be pivoted.
    std::vector<char> col_seen(n, 0);
    for (std::int64_t r = 0; r < n; ++r) {
        bool any = false;
        for (std::int64_t k = a.offsets()[r]; k < a.offsets()[r + 1]; ++k) {
            if (a.values()[k] != 0.0) {
                any = true;
                col_seen[a.indices()[k]] = 1;
            }
        }
        if (!any) {
            throw SingularMatrixError("factorize: structurally singular (empty row " +
                                      std::to_string(r) + ")");
        }
    }
    for (std::int64_t c = 0; c < n; ++c) {
        if (!col_seen[c]) {
            throw SingularMatrixError("factorize: structurally singular (empty column " +
                                      std::to_string(c) + ")");
        }
    }

    std::vector<Eigen::Triplet<double, int>> trips;
    trips.reserve(a.nnz());
    for (std::int64_t r = 0; r < n; ++r) {
        for (std::int64_t k = a.offsets()[r]; k < a.offsets()[r + 1]; ++k) {
            trips.emplace_back(static_cast<int>(r), static_cast<int>(a.indices()[k]),
                               a.values()[k]);
        }
    }
    Eigen::SparseMatrix<double, Eigen::ColMajor> mat(n, n);
    mat.setFromTriplets(trips.begin(), trips.end());
    mat.makeCompressed();

    auto impl = std::make_shared<Factorization::Impl>();
    impl->lu.analyzePattern(mat);
    impl->lu.factorize(mat);
    if (impl->lu.info() != Eigen::Success) {
        throw SingularMatrixError("factorize: numerically singular matrix (" +
                                  impl->lu.lastErrorMessage() + ")");
    }
    if (n > 0 && !std::isfinite(impl->lu.logAbsDeterminant())) {
        throw SingularMatrixError("factorize: numerically singular matrix");
    }

    Factorization f;
    f.impl_ = std::move(impl);
    f.n_ = n;
    return f;
}

Vector Factorization::solve(const Vector& b) const {
    if (!impl_) throw std::logic_error("Factorization::solve on empty factorization");
    if (b.size() != n_) dimension_error("Factorization::solve", n_, b.size());
    if (n_ == 0) return Vector(0);
    Vector x = impl_->lu.solve(b);
    if (!x.allFinite()) {
        throw SingularMatrixError("Factorization::solve produced non-finite values");
    }
    return x;
}

SpectralEstimate estimate_sigma_max(const SparseMatrix& a, double tol,
                                    std::int64_t max_iter, std::uint64_t seed) {
    if (!(tol > 0.0)) throw std::invalid_argument("estimate_sigma_max: tol must be > 0");
    SpectralEstimate est;
    if (a.cols() == 0 || a.rows() == 0) {
        est.converged = true;
        return est;
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(a.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
    v.normalize();

    Vector av;
    Vector z;
    double lambda_prev = -1.0;
    for (std::int64_t it = 1; it <= max_iter; ++it) {
        spmv_into(a, v, av);
        spmv_t_into(a, av, z);
        // Rayleigh quotient of A^T A at the unit vector v.
        const double lambda = av.squaredNorm();
        est.iterations_used = it;
        est.sigma_max = std::sqrt(lambda);
        const double znorm = z.norm();
        if (znorm == 0.0) {
            est.converged = true;
            return est;
        }
        if (lambda_prev >= 0.0 && std::abs(lambda - lambda_prev) <= tol * lambda) {
            // One more Rayleigh evaluation at the refined vector.
            v = z / znorm;
            spmv_into(a, v, av);
            est.sigma_max = std::sqrt(std::max(lambda, av.squaredNorm()));
            est.converged = true;
            return est;
        }
        lambda_prev = lambda;
        v = z / znorm;
    }
    return est;
}

}  // namespace drgd
