#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drgd/qp_model.hpp"
#include "drgd/sparse.hpp"

namespace drgd {

enum class StepMode { exact_line_search, fixed };

struct SolverConfig {
    double tol_fixed_point = 1e-6;
    std::int64_t max_iter = 200000;
    StepMode step_mode = StepMode::exact_line_search;
    double fixed_eta = 0.0;  ///< used when step_mode == fixed
    int steps_per_iter = 1;
    double safeguard_rho = 0.99;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    bool record_history = false;
    /// Iterates with |w|_inf above this are treated as divergence.
    double divergence_bound = 1e12;

    void validate() const;
};

/// (u~, u, w) of the splitting iteration.
struct IterateState {
    Vector u_tilde;
    Vector u;
    Vector w;
};

enum class SolveStatus { converged, max_iter, error };

const char* to_string(SolveStatus status);

struct SolveReport {
    SolveStatus status = SolveStatus::error;
    std::int64_t iterations = 0;
    IterateState state;
    Vector x;
    Vector y;
    QualityMetrics metrics;
    double final_residual = 0.0;
    /// |w^{k+1} - w^k|_2 per iteration (8 bytes per iteration when recorded).
    std::vector<double> residual_history;
    /// Step sizes actually applied, steps_per_iter entries per iteration.
    std::vector<double> step_sizes;
    std::string message;
};

/// Cold start w = 0, u~ = 0, u = Pi_C(0) = 0.
IterateState cold_state(const MonotoneData& data);

/// State whose first exact resolvent step reproduces (x; y):
/// u~ = (x; y), w = (I+M)(x; y) + q, u = Pi_C((x; y)).
IterateState warm_start_from_solution(const MonotoneData& data, const Vector& x,
                                      const Vector& y);

/// Douglas-Rachford splitting with a direct solve of (I+M) u~ = w - q.
/// The factorization is computed once per stepper.
class DrStepper {
public:
    explicit DrStepper(const MonotoneData& data);

    /// One iteration in place; returns |w_next - w|_2.
    double step(IterateState& state) const;

private:
    const MonotoneData* data_;
    Factorization factor_;
};

/// DR with the resolvent replaced by gradient steps on
/// f(u~) = 1/2 |(I+M) u~ - (w - q)|^2.
class DrgdStepper {
public:
    DrgdStepper(const MonotoneData& data, const SolverConfig& cfg);

    /// One outer iteration in place; returns |w_next - w|_2. Applied step
    /// sizes are appended to `steps` when non-null.
    double step(IterateState& state, std::vector<double>* steps = nullptr) const;

    /// rho / sigma_max(I+M)^2.
    double step_cap() const { return cap_; }

private:
    const MonotoneData* data_;
    SolverConfig cfg_;
    double cap_;
};

SolveReport dr_solve(const MonotoneData& data, const SolverConfig& cfg,
                     const std::optional<IterateState>& warm = std::nullopt);
SolveReport drgd_solve(const MonotoneData& data, const SolverConfig& cfg,
                       const std::optional<IterateState>& warm = std::nullopt);

/// Gradient of the least-squares subproblem at u~: (I+M)'((I+M)u~ - (w - q)).
Vector lsq_gradient(const MonotoneData& data, const Vector& w, const Vector& u_tilde);
double lsq_objective(const MonotoneData& data, const Vector& w, const Vector& u_tilde);

/// Exact minimizer of f(u~ - eta t) along -t: |t|^2 / |(I+M) t|^2.
/// Throws std::invalid_argument for t = 0.
double exact_linesearch_step(const Vector& t, const MonotoneData& data);

/// rho / sigma_max(I+M)^2.
double safeguard_cap(const MonotoneData& data, double rho = 0.99);

struct WolfeResult {
    bool sufficient_decrease = false;
    bool curvature = false;
    double decrease = 0.0;        ///< f(u~) - f(u~+)
    double decrease_bound = 0.0;  ///< c1 eta |grad f(u~)|^2
    double curvature_lhs = 0.0;   ///< grad f(u~+)' grad f(u~)
    double curvature_rhs = 0.0;   ///< c2 |grad f(u~)|^2

    bool passed() const { return sufficient_decrease && curvature; }
};

WolfeResult wolfe_check(const MonotoneData& data, const Vector& w, const Vector& u_tilde,
                        const Vector& u_tilde_next, double eta, double c1, double c2);

/// Phi(w) = (I - eta (I+M)'(I+M)) u~_prev + eta (I+M)'(w - q).
Vector gradient_step_map(const MonotoneData& data, double eta, const Vector& u_tilde_prev,
                         const Vector& w);

/// (2 Phi - Id)(w).
Vector reflected_gradient_map(const MonotoneData& data, double eta,
                              const Vector& u_tilde_prev, const Vector& w);

/// T(w) = w + [1/2 (Id + R_C (2 Phi - Id)) w - w] with R_C = 2 Pi_C - Id the
/// Cayley operator of the normal cone. Reference form of one fixed-step
/// DR-GD update of w, evaluated independently of DrgdStepper.
Vector dr_operator_apply(const MonotoneData& data, double eta, const Vector& u_tilde_prev,
                         const Vector& w);

}  // namespace drgd
