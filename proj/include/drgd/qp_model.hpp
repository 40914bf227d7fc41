#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "drgd/sparse.hpp"

namespace drgd {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// min 1/2 x'Px + c'x  s.t.  A_eq x = b_eq,  G x <= h,  l <= x <= u.
struct StandardQP {
    SparseMatrix P;
    Vector c;
    SparseMatrix A_eq;
    Vector b_eq;
    SparseMatrix G;
    Vector h;
    Vector l;  ///< may hold -inf
    Vector u;  ///< may hold +inf

    std::int64_t n() const { return c.size(); }
    std::int64_t m_eq() const { return b_eq.size(); }
    std::int64_t m_ineq() const { return h.size(); }

    /// Checks dimensions, exact symmetry of P, l <= u and a probabilistic PSD
    /// test (x'Px >= -1e-10 |x|^2 on `psd_probes` random probes). Throws
    /// std::invalid_argument on failure.
    void validate(int psd_probes = 20, std::uint64_t seed = 0) const;

    double objective(const Vector& x) const;
};

/// Product cone Zero^{m_zero} x Nonneg^{m_nonneg}, zero block first.
struct ConeSpec {
    std::int64_t m_zero = 0;
    std::int64_t m_nonneg = 0;

    std::int64_t size() const { return m_zero + m_nonneg; }
    friend bool operator==(const ConeSpec&, const ConeSpec&) = default;
};

/// min 1/2 x'Px + c'x  s.t.  Ax + s = b,  s in K.
struct ConicQP {
    SparseMatrix P;
    Vector c;
    SparseMatrix A;
    Vector b;
    ConeSpec cone;

    std::int64_t n() const { return c.size(); }
    std::int64_t m() const { return b.size(); }

    void validate() const;
    double objective(const Vector& x) const;
};

/// Where a conic row came from in the standard form.
struct RowOrigin {
    enum class Kind { equality, equality_upper, equality_lower, inequality, lower_bound, upper_bound };
    Kind kind;
    std::int64_t index;  ///< row of A_eq / G, or variable index for bounds

    friend bool operator==(const RowOrigin&, const RowOrigin&) = default;
};

struct ConicOptions {
    /// Encode each equality as a pair of inequalities (no zero cone).
    bool equalities_as_inequalities = false;
};

struct ConicTransform {
    ConicQP qp;
    std::vector<RowOrigin> provenance;
};

/// Rows are ordered: equalities, then G rows, then per variable its finite
/// lower bound (-x_i <= -l_i) followed by its finite upper bound (x_i <= u_i).
ConicTransform to_conic(const StandardQP& qp, const ConicOptions& options = {});

/// The inclusion 0 in Mu + q + N_C(u) with M = [[P, A'], [-A, 0]], q = (c; b),
/// C = R^n x K*. Holds I+M and a cached spectral-norm estimate of it.
struct MonotoneData {
    ConicQP problem;
    SparseMatrix M;
    SparseMatrix I_plus_M;
    Vector q;
    ConeSpec cone;
    std::int64_t n = 0;
    std::int64_t m = 0;
    double sigma_max = 0.0;

    std::int64_t dim() const { return n + m; }
};

MonotoneData assemble_inclusion(const ConicQP& cqp);

/// Projection onto C = R^n x (Free^{m_zero} x Nonneg^{m_nonneg}).
Vector project_cone_dual(const Vector& v, std::int64_t n, const ConeSpec& spec);
void project_cone_dual_inplace(Vector& v, std::int64_t n, const ConeSpec& spec);

/// Row index where the nonnegative block of the dual starts (n + m_zero).
inline std::int64_t nonneg_offset(std::int64_t n, const ConeSpec& spec) {
    return n + spec.m_zero;
}

struct QualityMetrics {
    double objective = 0.0;
    double max_eq_viol = 0.0;
    double max_ineq_viol = 0.0;
    double dual_residual_inf = 0.0;
    double complementarity = 0.0;
    std::optional<double> l2_to_reference;

    double max_viol() const { return std::max(max_eq_viol, max_ineq_viol); }
};

struct PrimalDual {
    Vector x;
    Vector y;
};

QualityMetrics quality(const ConicQP& cqp, const Vector& x, const Vector& y,
                       const std::optional<PrimalDual>& reference = std::nullopt);

}  // namespace drgd
