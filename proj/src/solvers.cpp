#include "drgd/solvers.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace drgd {

void SolverConfig::validate() const {
    if (!(tol_fixed_point > 0.0)) throw std::invalid_argument("SolverConfig: tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("SolverConfig: max_iter must be >= 1");
    if (steps_per_iter < 1) throw std::invalid_argument("SolverConfig: steps_per_iter must be >= 1");
    if (!(safeguard_rho > 0.0 && safeguard_rho < 1.0)) {
        throw std::invalid_argument("SolverConfig: safeguard_rho must lie in (0, 1)");
    }
    if (!(0.0 < wolfe_c1 && wolfe_c1 < 0.5 && 0.5 < wolfe_c2 && wolfe_c2 < 1.0)) {
        throw std::invalid_argument("SolverConfig: need 0 < c1 < 1/2 < c2 < 1");
    }
    if (step_mode == StepMode::fixed && !(fixed_eta > 0.0)) {
        throw std::invalid_argument("SolverConfig: fixed step size must be > 0");
    }
}

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iter: return "max_iter";
        case SolveStatus::error: return "error";
    }
    return "unknown";
}

IterateState cold_state(const MonotoneData& data) {
    return {Vector::Zero(data.dim()), Vector::Zero(data.dim()), Vector::Zero(data.dim())};
}

IterateState warm_start_from_solution(const MonotoneData& data, const Vector& x,
                                      const Vector& y) {
    if (x.size() != data.n || y.size() != data.m) {
        throw std::invalid_argument("warm_start_from_solution: dimension mismatch");
    }
    Vector uhat(data.dim());
    uhat << x, y;
    IterateState s;
    s.w = spmv(data.I_plus_M, uhat) + data.q;
    s.u = project_cone_dual(uhat, data.n, data.cone);
    s.u_tilde = std::move(uhat);
    return s;
}

DrStepper::DrStepper(const MonotoneData& data)
    : data_(&data), factor_(factorize(data.I_plus_M)) {}

double DrStepper::step(IterateState& state) const {
    const auto& d = *data_;
    state.u_tilde = factor_.solve(state.w - d.q);
    state.u = 2.0 * state.u_tilde - state.w;
    project_cone_dual_inplace(state.u, d.n, d.cone);
    Vector w_next = state.w + (state.u - state.u_tilde);
    const double res = (w_next - state.w).norm();
    state.w = std::move(w_next);
    return res;
}

DrgdStepper::DrgdStepper(const MonotoneData& data, const SolverConfig& cfg)
    : data_(&data), cfg_(cfg), cap_(safeguard_cap(data, cfg.safeguard_rho)) {
    cfg_.validate();
}

double DrgdStepper::step(IterateState& state, std::vector<double>* steps) const {
    const auto& d = *data_;
    const Vector rhs = state.w - d.q;
    Vector r;
    Vector t;
    Vector bt;
    for (int s = 0; s < cfg_.steps_per_iter; ++s) {
        spmv_into(d.I_plus_M, state.u_tilde, r);
        r -= rhs;
        spmv_t_into(d.I_plus_M, r, t);
        const double tt = t.squaredNorm();
        double eta = 0.0;
        if (tt > 0.0) {
            if (cfg_.step_mode == StepMode::exact_line_search) {
                spmv_into(d.I_plus_M, t, bt);
                eta = tt / bt.squaredNorm();
            } else {
                eta = cfg_.fixed_eta;
            }
            eta = std::min(eta, cap_);
            state.u_tilde -= eta * t;
        }
        if (steps) steps->push_back(eta);
    }
    state.u = 2.0 * state.u_tilde - state.w;
    project_cone_dual_inplace(state.u, d.n, d.cone);
    Vector w_next = state.w + (state.u - state.u_tilde);
    const double res = (w_next - state.w).norm();
    state.w = std::move(w_next);
    return res;
}

namespace {

template <class StepFn>
SolveReport run_loop(const MonotoneData& data, const SolverConfig& cfg, IterateState state,
                     StepFn&& step) {
    SolveReport rep;
    IterateState best = state;
    double best_res = std::numeric_limits<double>::infinity();
    rep.status = SolveStatus::max_iter;
    for (std::int64_t k = 1; k <= cfg.max_iter; ++k) {
        const double res = step(state, cfg.record_history ? &rep.step_sizes : nullptr);
        rep.iterations = k;
        rep.final_residual = res;
        if (cfg.record_history) rep.residual_history.push_back(res);
        if (!std::isfinite(res) || !state.w.allFinite() || !state.u_tilde.allFinite() ||
            state.w.lpNorm<Eigen::Infinity>() > cfg.divergence_bound) {
            std::ostringstream os;
            os << "divergence at iteration " << k << " (residual " << res << ", |w|_inf "
               << state.w.lpNorm<Eigen::Infinity>() << ")";
            rep.status = SolveStatus::error;
            rep.message = os.str();
            break;
        }
        if (res <= cfg.tol_fixed_point) {
            rep.status = SolveStatus::converged;
            best = state;
            break;
        }
        if (res < best_res) {
            best_res = res;
            best = state;
        }
    }
    if (rep.status == SolveStatus::max_iter) rep.message = "iteration limit reached";
    rep.state = std::move(best);
    rep.x = rep.state.u.head(data.n);
    rep.y = rep.state.u.tail(data.m);
    if (rep.x.allFinite() && rep.y.allFinite()) {
        rep.metrics = quality(data.problem, rep.x, rep.y);
    }
    return rep;
}

IterateState initial_state(const MonotoneData& data, const std::optional<IterateState>& warm) {
    if (!warm) return cold_state(data);
    if (warm->w.size() != data.dim() || warm->u_tilde.size() != data.dim() ||
        warm->u.size() != data.dim()) {
        throw std::invalid_argument("warm start state has wrong dimension");
    }
    return *warm;
}

}  // namespace

SolveReport dr_solve(const MonotoneData& data, const SolverConfig& cfg,
                     const std::optional<IterateState>& warm) {
    cfg.validate();
    DrStepper stepper(data);
    return run_loop(data, cfg, initial_state(data, warm),
                    [&](IterateState& s, std::vector<double>*) { return stepper.step(s); });
}

SolveReport drgd_solve(const MonotoneData& data, const SolverConfig& cfg,
                       const std::optional<IterateState>& warm) {
    cfg.validate();
    DrgdStepper stepper(data, cfg);
    return run_loop(data, cfg, initial_state(data, warm),
                    [&](IterateState& s, std::vector<double>* steps) {
                        return stepper.step(s, steps);
                    });
}

Vector lsq_gradient(const MonotoneData& data, const Vector& w, const Vector& u_tilde) {
    return spmv_t(data.I_plus_M, spmv(data.I_plus_M, u_tilde) - (w - data.q));
}

double lsq_objective(const MonotoneData& data, const Vector& w, const Vector& u_tilde) {
    return 0.5 * (spmv(data.I_plus_M, u_tilde) - (w - data.q)).squaredNorm();
}

double exact_linesearch_step(const Vector& t, const MonotoneData& data) {
    const double tt = t.squaredNorm();
    if (tt == 0.0) {
        throw std::invalid_argument("exact_linesearch_step: zero search direction");
    }
    return tt / spmv(data.I_plus_M, t).squaredNorm();
}

double safeguard_cap(const MonotoneData& data, double rho) {
    return rho / (data.sigma_max * data.sigma_max);
}

WolfeResult wolfe_check(const MonotoneData& data, const Vector& w, const Vector& u_tilde,
                        const Vector& u_tilde_next, double eta, double c1, double c2) {
    const Vector g = lsq_gradient(data, w, u_tilde);
    const Vector g_next = lsq_gradient(data, w, u_tilde_next);
    const double gg = g.squaredNorm();
    WolfeResult r;
    r.decrease = lsq_objective(data, w, u_tilde) - lsq_objective(data, w, u_tilde_next);
    r.decrease_bound = c1 * eta * gg;
    r.curvature_lhs = g_next.dot(g);
    r.curvature_rhs = c2 * gg;
    r.sufficient_decrease = r.decrease >= r.decrease_bound;
    r.curvature = r.curvature_lhs <= r.curvature_rhs;
    return r;
}

Vector gradient_step_map(const MonotoneData& data, double eta, const Vector& u_tilde_prev,
                         const Vector& w) {
    const auto& b = data.I_plus_M;
    const Vector btb_u = spmv_t(b, spmv(b, u_tilde_prev));
    const Vector bt_rhs = spmv_t(b, w - data.q);
    return (u_tilde_prev - eta * btb_u) + eta * bt_rhs;
}

Vector reflected_gradient_map(const MonotoneData& data, double eta,
                              const Vector& u_tilde_prev, const Vector& w) {
    return 2.0 * gradient_step_map(data, eta, u_tilde_prev, w) - w;
}

Vector dr_operator_apply(const MonotoneData& data, double eta, const Vector& u_tilde_prev,
                         const Vector& w) {
    const Vector z = reflected_gradient_map(data, eta, u_tilde_prev, w);
    // Cayley operator of N_C: reflection through C.
    const Vector cayley = 2.0 * project_cone_dual(z, data.n, data.cone) - z;
    return w + (0.5 * (w + cayley) - w);
}

}  // namespace drgd
