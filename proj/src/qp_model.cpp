#include "drgd/qp_model.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace drgd {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

void require_shape(const SparseMatrix& a, std::int64_t rows, std::int64_t cols,
                   const char* name) {
    if (a.rows() != rows || a.cols() != cols) {
        std::ostringstream os;
        os << name << ": expected " << rows << "x" << cols << ", got " << a.rows() << "x"
           << a.cols();
        throw std::invalid_argument(os.str());
    }
}

void check_symmetric(const SparseMatrix& p) {
    require(p.transpose() == p, "P must be exactly symmetric");
}

void check_psd(const SparseMatrix& p, int probes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector x(p.cols());
    for (int k = 0; k < probes; ++k) {
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
        if (x.dot(spmv(p, x)) < -1e-10 * x.squaredNorm()) {
            throw std::invalid_argument("P is not positive semidefinite (probe " +
                                        std::to_string(k) + ")");
        }
    }
}

}  // namespace

void StandardQP::validate(int psd_probes, std::uint64_t seed) const {
    const auto nv = n();
    require_shape(P, nv, nv, "P");
    require_shape(A_eq, m_eq(), nv, "A_eq");
    require_shape(G, m_ineq(), nv, "G");
    require(l.size() == nv && u.size() == nv, "bounds must have length n");
    for (std::int64_t i = 0; i < nv; ++i) {
        require(!std::isnan(l[i]) && !std::isnan(u[i]), "bounds must not be NaN");
        require(l[i] <= u[i], "lower bound exceeds upper bound at " + std::to_string(i));
        require(l[i] != kInf && u[i] != -kInf, "empty bound interval at " + std::to_string(i));
    }
    require(c.allFinite() && b_eq.allFinite() && h.allFinite(), "data must be finite");
    check_symmetric(P);
    check_psd(P, psd_probes, seed);
}

double StandardQP::objective(const Vector& x) const {
    return 0.5 * x.dot(spmv(P, x)) + c.dot(x);
}

void ConicQP::validate() const {
    require_shape(P, n(), n(), "P");
    require_shape(A, m(), n(), "A");
    require(cone.size() == m(), "cone size must equal the number of rows of A");
    require(cone.m_zero >= 0 && cone.m_nonneg >= 0, "cone block sizes must be >= 0");
    check_symmetric(P);
}

double ConicQP::objective(const Vector& x) const {
    return 0.5 * x.dot(spmv(P, x)) + c.dot(x);
}

ConicTransform to_conic(const StandardQP& qp, const ConicOptions& options) {
    const auto nv = qp.n();
    std::vector<Triplet> rows;
    std::vector<double> rhs;
    std::vector<RowOrigin> origin;
    std::int64_t next = 0;

    auto copy_row = [&](const SparseMatrix& src, std::int64_t r, double sign) {
        for (std::int64_t k = src.offsets()[r]; k < src.offsets()[r + 1]; ++k) {
            rows.push_back({next, src.indices()[k], sign * src.values()[k]});
        }
    };

    ConeSpec cone;
    if (!options.equalities_as_inequalities) {
        for (std::int64_t r = 0; r < qp.m_eq(); ++r) {
            copy_row(qp.A_eq, r, 1.0);
            rhs.push_back(qp.b_eq[r]);
            origin.push_back({RowOrigin::Kind::equality, r});
            ++next;
        }
        cone.m_zero = qp.m_eq();
    } else {
        for (std::int64_t r = 0; r < qp.m_eq(); ++r) {
            copy_row(qp.A_eq, r, 1.0);
            rhs.push_back(qp.b_eq[r]);
            origin.push_back({RowOrigin::Kind::equality_upper, r});
            ++next;
            copy_row(qp.A_eq, r, -1.0);
            rhs.push_back(-qp.b_eq[r]);
            origin.push_back({RowOrigin::Kind::equality_lower, r});
            ++next;
        }
    }
    for (std::int64_t r = 0; r < qp.m_ineq(); ++r) {
        copy_row(qp.G, r, 1.0);
        rhs.push_back(qp.h[r]);
        origin.push_back({RowOrigin::Kind::inequality, r});
        ++next;
    }
    for (std::int64_t i = 0; i < nv; ++i) {
        if (std::isfinite(qp.l[i])) {
            rows.push_back({next, i, -1.0});
            rhs.push_back(-qp.l[i]);
            origin.push_back({RowOrigin::Kind::lower_bound, i});
            ++next;
        }
        if (std::isfinite(qp.u[i])) {
            rows.push_back({next, i, 1.0});
            rhs.push_back(qp.u[i]);
            origin.push_back({RowOrigin::Kind::upper_bound, i});
            ++next;
        }
    }
    cone.m_nonneg = next - cone.m_zero;

    ConicTransform out;
    out.qp.P = qp.P;
    out.qp.c = qp.c;
    out.qp.A = SparseMatrix::from_triplets(next, nv, std::move(rows));
    out.qp.b = Eigen::Map<const Vector>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    out.qp.cone = cone;
    out.provenance = std::move(origin);
    return out;
}

MonotoneData assemble_inclusion(const ConicQP& cqp) {
    cqp.validate();
    const auto n = cqp.n();
    const auto m = cqp.m();
    const auto dim = n + m;

    std::vector<Triplet> m_entries;
    m_entries.reserve(cqp.P.nnz() + 2 * cqp.A.nnz());
    for (std::int64_t r = 0; r < n; ++r) {
        for (std::int64_t k = cqp.P.offsets()[r]; k < cqp.P.offsets()[r + 1]; ++k) {
            m_entries.push_back({r, cqp.P.indices()[k], cqp.P.values()[k]});
        }
    }
    for (std::int64_t r = 0; r < m; ++r) {
        for (std::int64_t k = cqp.A.offsets()[r]; k < cqp.A.offsets()[r + 1]; ++k) {
            const auto col = cqp.A.indices()[k];
            const double v = cqp.A.values()[k];
            m_entries.push_back({col, n + r, v});   // A' block
            m_entries.push_back({n + r, col, -v});  // -A block
        }
    }

    std::vector<Triplet> ipm_entries;
    ipm_entries.reserve(m_entries.size() + dim);
    std::vector<char> has_diag(dim, 0);
    for (const auto& t : m_entries) {
        if (t.row == t.col) {
            ipm_entries.push_back({t.row, t.col, 1.0 + t.value});
            has_diag[t.row] = 1;
        } else {
            ipm_entries.push_back(t);
        }
    }
    for (std::int64_t i = 0; i < dim; ++i) {
        if (!has_diag[i]) ipm_entries.push_back({i, i, 1.0});
    }

    MonotoneData data;
    data.problem = cqp;
    data.M = SparseMatrix::from_triplets(dim, dim, std::move(m_entries));
    data.I_plus_M = SparseMatrix::from_triplets(dim, dim, std::move(ipm_entries));
    data.q.resize(dim);
    data.q << cqp.c, cqp.b;
    data.cone = cqp.cone;
    data.n = n;
    data.m = m;
    data.sigma_max = estimate_sigma_max(data.I_plus_M, 1e-12, 100000).sigma_max;
    return data;
}

void project_cone_dual_inplace(Vector& v, std::int64_t n, const ConeSpec& spec) {
    if (v.size() != n + spec.size()) {
        throw std::invalid_argument("project_cone_dual: vector length must be n + m");
    }
    for (std::int64_t i = nonneg_offset(n, spec); i < v.size(); ++i) {
        v[i] = std::max(0.0, v[i]);
    }
}

Vector project_cone_dual(const Vector& v, std::int64_t n, const ConeSpec& spec) {
    Vector out = v;
    project_cone_dual_inplace(out, n, spec);
    return out;
}

QualityMetrics quality(const ConicQP& cqp, const Vector& x, const Vector& y,
                       const std::optional<PrimalDual>& reference) {
    if (x.size() != cqp.n() || y.size() != cqp.m()) {
        throw std::invalid_argument("quality: dimension mismatch");
    }
    QualityMetrics q;
    q.objective = cqp.objective(x);

    const Vector s = cqp.b - spmv(cqp.A, x);
    const auto mz = cqp.cone.m_zero;
    const auto mn = cqp.cone.m_nonneg;
    if (mz > 0) q.max_eq_viol = s.head(mz).lpNorm<Eigen::Infinity>();
    if (mn > 0) {
        q.max_ineq_viol = (-s.tail(mn)).cwiseMax(0.0).maxCoeff();
        q.complementarity = std::abs(s.tail(mn).dot(y.tail(mn)));
    }
    const Vector dual = spmv(cqp.P, x) + spmv_t(cqp.A, y) + cqp.c;
    q.dual_residual_inf = dual.size() > 0 ? dual.lpNorm<Eigen::Infinity>() : 0.0;

    if (reference) {
        if (reference->x.size() != x.size() || reference->y.size() != y.size()) {
            throw std::invalid_argument("quality: reference dimension mismatch");
        }
        q.l2_to_reference =
            std::sqrt((x - reference->x).squaredNorm() + (y - reference->y).squaredNorm());
    }
    return q;
}

}  // namespace drgd
