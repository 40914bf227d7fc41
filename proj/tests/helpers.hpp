#pragma once

#include <random>

#include "drgd/datagen.hpp"
#include "drgd/qp_model.hpp"
#include "drgd/solvers.hpp"

namespace testutil {

using drgd::Matrix;
using drgd::Vector;

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                            double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
    return m;
}

/// Dense-then-sparsified random matrix (about half the entries kept).
inline drgd::SparseMatrix random_sparse(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    Matrix m = random_matrix(rng, r, c);
    std::bernoulli_distribution keep(0.5);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i)
            if (!keep(rng)) m(i, j) = 0.0;
    return drgd::SparseMatrix::from_dense(m);
}

/// min 1/2 x^2  s.t.  x >= 1. Optimum x* = 1 with multiplier y* = 1.
inline drgd::StandardQP one_var_qp() {
    drgd::StandardQP qp;
    qp.P = drgd::SparseMatrix::identity(1);
    qp.c = Vector::Zero(1);
    qp.A_eq = drgd::SparseMatrix::zero(0, 1);
    qp.b_eq = Vector(0);
    qp.G = drgd::SparseMatrix::zero(0, 1);
    qp.h = Vector(0);
    qp.l = Vector::Constant(1, 1.0);
    qp.u = Vector::Constant(1, drgd::kInf);
    return qp;
}

/// Feasible random QP with a dense PSD (not diagonal) P, equalities,
/// inequalities and box bounds. Feasible at a random point in [-0.5, 0.5]^n.
inline drgd::StandardQP random_qp(std::uint64_t seed, int n, int m_eq, int m_ineq) {
    std::mt19937_64 rng(seed);
    drgd::StandardQP qp;
    const Matrix l = random_matrix(rng, n, n) / std::sqrt(static_cast<double>(n));
    Matrix p = l * l.transpose() + 0.1 * Matrix::Identity(n, n);
    p = 0.5 * (p + p.transpose()).eval();
    qp.P = drgd::SparseMatrix::from_dense(p);
    qp.c = random_vector(rng, n);
    qp.A_eq = random_sparse(rng, m_eq, n);
    qp.G = random_sparse(rng, m_ineq, n);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    Vector x0(n);
    for (int i = 0; i < n; ++i) x0[i] = unif(rng);
    qp.b_eq = drgd::spmv(qp.A_eq, x0);
    qp.h = drgd::spmv(qp.G, x0) + Vector::Constant(m_ineq, 0.5);
    qp.l = Vector::Constant(n, -1.0);
    qp.u = Vector::Constant(n, 1.0);
    return qp;
}

inline drgd::MonotoneData random_data(std::uint64_t seed, int n = 6, int m_eq = 2, int m_ineq = 2) {
    return drgd::assemble_inclusion(drgd::to_conic(random_qp(seed, n, m_eq, m_ineq)).qp);
}

/// QP(RHS) instances of size n assembled into inclusion data.
inline std::vector<drgd::MonotoneData> qp_rhs_instances(int n, int count, std::uint64_t seed) {
    drgd::GenSpec spec;
    spec.family = drgd::Family::qp_rhs;
    spec.n = n;
    spec.count = count;
    spec.seed = seed;
    const auto b = drgd::generate(spec);
    std::vector<drgd::MonotoneData> out;
    for (std::size_t i = 0; i < b.instances.size(); ++i) {
        out.push_back(drgd::assemble_inclusion(drgd::conic_instance(b, i)));
    }
    return out;
}

/// A random state with u in C.
inline drgd::IterateState random_state(const drgd::MonotoneData& d, std::mt19937_64& rng) {
    drgd::IterateState s;
    s.u_tilde = random_vector(rng, d.dim());
    s.w = random_vector(rng, d.dim());
    s.u = drgd::project_cone_dual(random_vector(rng, d.dim()), d.n, d.cone);
    return s;
}

}  // namespace testutil
