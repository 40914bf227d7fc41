#include "drgd/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "drgd/parallel.hpp"

namespace drgd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

RunSummary summarize(const SolveReport& rep) {
    RunSummary s;
    s.status = to_string(rep.status);
    s.iterations = rep.iterations;
    s.objective = rep.metrics.objective;
    s.max_eq_viol = rep.metrics.max_eq_viol;
    s.max_ineq_viol = rep.metrics.max_ineq_viol;
    s.message = rep.message;
    return s;
}

RunSummary failed_run(const std::string& what) {
    RunSummary s;
    s.status = "error";
    s.message = what;
    return s;
}

bool converged(const RunSummary& s) { return s.status == "converged"; }

double mean(const std::vector<double>& v) {
    if (v.empty()) return std::nan("");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string fmt_int(std::int64_t v) { return std::to_string(v); }

std::string fmt_fixed(double v, int digits) {
    if (!std::isfinite(v)) return format_double(v);
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

std::string fmt_percent(double v) {
    if (!std::isfinite(v)) return format_double(v);
    return fmt_fixed(100.0 * v, 1) + "%";
}

}  // namespace

std::vector<MonotoneData> assemble_instances(const DatasetBundle& bundle,
                                             const std::vector<std::size_t>& indices, int jobs) {
    std::vector<MonotoneData> out(indices.size());
    parallel_for(indices.size(), jobs, [&](std::size_t i) {
        out[i] = assemble_inclusion(conic_instance(bundle, indices[i]));
    });
    return out;
}

std::vector<LabeledInstance> labeled_instances(const DatasetBundle& bundle,
                                               const std::vector<std::size_t>& indices,
                                               int jobs) {
    if (!bundle.labeled()) {
        throw std::invalid_argument(
            "bundle has no labels; run label_bundle (the 'label' command) first");
    }
    for (auto i : indices) {
        if (i >= bundle.labels.size() || !bundle.labels[i]) {
            throw std::invalid_argument("instance " + std::to_string(i) +
                                        " has no label; run label_bundle (the 'label' command) "
                                        "and exclude failed instances from the split");
        }
    }
    auto data = assemble_instances(bundle, indices, jobs);
    std::vector<LabeledInstance> out;
    out.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        out.push_back({std::move(data[k]), *bundle.labels[indices[k]]});
    }
    return out;
}

// ---------------------------------------------------------------------------

ComparisonReport compare(const std::vector<MonotoneData>& instances,
                         const std::vector<std::size_t>& ids, const CompareOptions& options) {
    if (ids.size() != instances.size()) throw std::invalid_argument("compare: ids/instances mismatch");
    for (int s : options.steps) {
        if (s < 1) throw std::invalid_argument("compare: gradient steps must be >= 1");
    }
    ComparisonReport rep;
    rep.options = options;
    rep.rows.resize(instances.size());
    parallel_for(instances.size(), options.jobs, [&](std::size_t i) {
        const auto& data = instances[i];
        auto& row = rep.rows[i];
        row.instance = ids[i];
        row.n = data.n;
        row.m = data.m;
        SolverConfig cfg;
        cfg.tol_fixed_point = options.tol;
        cfg.max_iter = options.max_iter;
        cfg.record_history = options.record_history;
        try {
            auto r = dr_solve(data, cfg);
            row.dr = summarize(r);
            row.dr_history = std::move(r.residual_history);
        } catch (const std::exception& e) {
            row.dr = failed_run(e.what());
        }
        auto run_drgd = [&](int steps, std::vector<double>* history) {
            SolverConfig c = cfg;
            c.steps_per_iter = steps;
            c.record_history = history != nullptr;
            try {
                auto r = drgd_solve(data, c);
                if (history) *history = std::move(r.residual_history);
                return summarize(r);
            } catch (const std::exception& e) {
                return failed_run(e.what());
            }
        };
        row.drgd = run_drgd(1, options.record_history ? &row.drgd_history : nullptr);
        for (int s : options.steps) row.by_steps.push_back(s == 1 ? row.drgd : run_drgd(s, nullptr));
    });
    return rep;
}

double ComparisonReport::mean_dr_iterations() const {
    std::vector<double> v;
    for (const auto& r : rows) {
        if (converged(r.dr)) v.push_back(static_cast<double>(r.dr.iterations));
    }
    return mean(v);
}

double ComparisonReport::mean_drgd_iterations(std::size_t steps_index) const {
    std::vector<double> v;
    for (const auto& r : rows) {
        const auto& s = r.by_steps.at(steps_index);
        if (converged(s)) v.push_back(static_cast<double>(s.iterations));
    }
    return mean(v);
}

double ComparisonReport::iteration_ratio() const {
    double dr = 0.0, gd = 0.0;
    for (const auto& r : rows) {
        if (converged(r.dr) && converged(r.drgd)) {
            dr += static_cast<double>(r.dr.iterations);
            gd += static_cast<double>(r.drgd.iterations);
        }
    }
    return dr > 0.0 ? gd / dr : std::nan("");
}

double ComparisonReport::mean_instance_ratio() const {
    std::vector<double> v;
    for (const auto& r : rows) {
        if (converged(r.dr) && converged(r.drgd) && r.dr.iterations > 0) {
            v.push_back(static_cast<double>(r.drgd.iterations) / static_cast<double>(r.dr.iterations));
        }
    }
    return mean(v);
}

bool ComparisonReport::all_converged() const {
    return std::all_of(rows.begin(), rows.end(), [](const CompareRow& r) {
        return converged(r.dr) && converged(r.drgd) &&
               std::all_of(r.by_steps.begin(), r.by_steps.end(), converged);
    });
}

Table ComparisonReport::summary_table() const {
    Table t;
    t.title = "Douglas-Rachford (exact solve) vs DR-GD (one gradient step)";
    t.notes.push_back("Fixed-point tolerance " + format_double(options.tol) +
                      "; means over instances where the algorithm converged; ratio = mean DR-GD "
                      "iterations / mean DR iterations.");
    t.columns = {"n",          "m",           "instances",    "DR obj",     "DR max eq",
                 "DR max ineq", "DR iters",   "DR-GD obj",    "DR-GD max eq", "DR-GD max ineq",
                 "DR-GD iters", "ratio",      "per-instance ratio"};
    if (rows.empty()) return t;
    std::vector<double> obj1, eq1, in1, obj2, eq2, in2, it2;
    for (const auto& r : rows) {
        if (converged(r.dr)) {
            obj1.push_back(r.dr.objective);
            eq1.push_back(r.dr.max_eq_viol);
            in1.push_back(r.dr.max_ineq_viol);
        }
        if (converged(r.drgd)) {
            obj2.push_back(r.drgd.objective);
            eq2.push_back(r.drgd.max_eq_viol);
            in2.push_back(r.drgd.max_ineq_viol);
            it2.push_back(static_cast<double>(r.drgd.iterations));
        }
    }
    auto vmax = [](const std::vector<double>& v) {
        return v.empty() ? std::nan("") : *std::max_element(v.begin(), v.end());
    };
    t.add_row({fmt_int(rows.front().n), fmt_int(rows.front().m), fmt_int(static_cast<std::int64_t>(rows.size())),
               fmt_fixed(mean(obj1), 3), format_sci(vmax(eq1), 1), format_sci(vmax(in1), 1),
               fmt_fixed(mean_dr_iterations(), 1), fmt_fixed(mean(obj2), 3),
               format_sci(vmax(eq2), 1), format_sci(vmax(in2), 1),
               fmt_fixed(mean(it2), 1),
               fmt_fixed(iteration_ratio(), 2), fmt_fixed(mean_instance_ratio(), 2)});
    return t;
}

Table ComparisonReport::instance_table() const {
    Table t;
    t.title = "Per-instance comparison";
    t.columns = {"instance", "DR status", "DR iters", "DR obj", "DR-GD status", "DR-GD iters",
                 "DR-GD obj", "ratio"};
    for (const auto& r : rows) {
        const double ratio = converged(r.dr) && converged(r.drgd) && r.dr.iterations > 0
                                 ? static_cast<double>(r.drgd.iterations) / r.dr.iterations
                                 : std::nan("");
        t.add_row({fmt_int(static_cast<std::int64_t>(r.instance)), r.dr.status,
                   fmt_int(r.dr.iterations), format_double(r.dr.objective), r.drgd.status,
                   fmt_int(r.drgd.iterations), format_double(r.drgd.objective),
                   fmt_fixed(ratio, 4)});
    }
    return t;
}

Table ComparisonReport::steps_table() const {
    Table t;
    t.title = "DR-GD iterations by gradient steps per iteration";
    t.columns = {"steps", "mean iters", "converged", "ratio to DR"};
    const double dr = mean_dr_iterations();
    for (std::size_t s = 0; s < options.steps.size(); ++s) {
        std::int64_t ok = 0;
        for (const auto& r : rows) ok += converged(r.by_steps.at(s)) ? 1 : 0;
        const double it = mean_drgd_iterations(s);
        t.add_row({fmt_int(options.steps[s]), fmt_fixed(it, 1),
                   fmt_int(ok) + "/" + fmt_int(static_cast<std::int64_t>(rows.size())),
                   fmt_fixed(it / dr, 3)});
    }
    return t;
}

Table ComparisonReport::history_table() const {
    std::vector<std::pair<std::string, std::vector<double>>> runs;
    for (const auto& r : rows) {
        runs.emplace_back(std::to_string(r.instance) + ":dr", r.dr_history);
        runs.emplace_back(std::to_string(r.instance) + ":drgd", r.drgd_history);
    }
    return residual_history_table(runs);
}

// ---------------------------------------------------------------------------

IterateState warm_state_from_prediction(const MonotoneData& data, const ForwardResult& pred,
                                        bool project_prediction) {
    Vector y = pred.y_hat;
    if (project_prediction) {
        Vector full = pred.output();
        project_cone_dual_inplace(full, data.n, data.cone);
        y = full.tail(data.m);
    }
    return warm_start_from_solution(data, pred.x_hat, y);
}

WarmStartReport evaluate_warm_start(const std::vector<MonotoneData>& instances,
                                    const std::vector<std::size_t>& ids,
                                    const std::vector<std::optional<PrimalDual>>& labels,
                                    const NetParams& params, const EvalOptions& options) {
    if (ids.size() != instances.size() || (!labels.empty() && labels.size() != instances.size())) {
        throw std::invalid_argument("evaluate_warm_start: ids/labels/instances size mismatch");
    }
    WarmStartReport rep;
    rep.options = options;
    SolverConfig cfg;
    cfg.tol_fixed_point = options.tol;
    cfg.max_iter = options.max_iter;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& data = instances[i];
        WarmStartRow row;
        row.instance = ids[i];
        try {
            auto t0 = Clock::now();
            const SolveReport cold = dr_solve(data, cfg);
            row.cold_time = seconds_since(t0);
            row.cold_status = to_string(cold.status);
            row.cold_iterations = cold.iterations;

            t0 = Clock::now();
            const ForwardResult pred = forward(data, params);
            const IterateState warm_start =
                warm_state_from_prediction(data, pred, options.project_prediction);
            row.inference_time = seconds_since(t0);

            const Vector x = pred.x_hat;
            const Vector y = warm_start.u_tilde.tail(data.m);
            std::optional<PrimalDual> ref;
            if (!labels.empty()) ref = labels[i];
            const QualityMetrics q = quality(data.problem, x, y, ref);
            row.objective = q.objective;
            row.max_violation = q.max_viol();
            row.l2_to_reference = q.l2_to_reference;

            t0 = Clock::now();
            const SolveReport warm = dr_solve(data, cfg, warm_start);
            row.warm_time = seconds_since(t0);
            row.warm_status = to_string(warm.status);
            row.warm_iterations = warm.iterations;
            if (cold.status != SolveStatus::converged || warm.status != SolveStatus::converged) {
                row.error = "solver did not converge (cold " + row.cold_status + ", warm " +
                            row.warm_status + ")";
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

double warm_start_iteration_ratio(const std::vector<MonotoneData>& instances,
                                  const NetParams& params, const EvalOptions& options) {
    std::vector<std::size_t> ids(instances.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    return evaluate_warm_start(instances, ids, {}, params, options).iteration_ratio();
}

namespace {

template <class Fn>
double mean_ok(const std::vector<WarmStartRow>& rows, Fn&& fn) {
    std::vector<double> v;
    for (const auto& r : rows) {
        if (r.ok()) v.push_back(fn(r));
    }
    return mean(v);
}

}  // namespace

double WarmStartReport::mean_cold_iterations() const {
    return mean_ok(rows, [](const WarmStartRow& r) { return static_cast<double>(r.cold_iterations); });
}

double WarmStartReport::mean_warm_iterations() const {
    return mean_ok(rows, [](const WarmStartRow& r) { return static_cast<double>(r.warm_iterations); });
}

double WarmStartReport::iteration_ratio() const {
    return 1.0 - mean_warm_iterations() / mean_cold_iterations();
}

double WarmStartReport::mean_instance_ratio() const {
    return mean_ok(rows, [](const WarmStartRow& r) {
        return 1.0 - static_cast<double>(r.warm_iterations) / static_cast<double>(r.cold_iterations);
    });
}

double WarmStartReport::time_ratio() const {
    const double cold = mean_ok(rows, [](const WarmStartRow& r) { return r.cold_time; });
    const double warm =
        mean_ok(rows, [](const WarmStartRow& r) { return r.warm_time + r.inference_time; });
    return 1.0 - warm / cold;
}

std::size_t WarmStartReport::failures() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const WarmStartRow& r) { return !r.ok(); }));
}

Table WarmStartReport::summary_table() const {
    Table t;
    t.title = "Warm-start summary";
    t.notes.push_back(kWarmStartNote);
    t.notes.push_back("Ratio = 1 - mean(warm iters)/mean(cold iters); per-instance ratio = "
                      "mean of 1 - warm_i/cold_i; time ratio includes inference time.");
    t.columns = {"instances", "failed",     "cold iters",     "warm iters", "ratio",
                 "per-instance ratio",      "cold time (s)",  "warm time (s)", "inf. time (s)",
                 "time ratio"};
    if (rows.empty()) return t;
    const double ct = mean_ok(rows, [](const WarmStartRow& r) { return r.cold_time; });
    const double wt = mean_ok(rows, [](const WarmStartRow& r) { return r.warm_time; });
    const double it = mean_ok(rows, [](const WarmStartRow& r) { return r.inference_time; });
    t.add_row({fmt_int(static_cast<std::int64_t>(rows.size())),
               fmt_int(static_cast<std::int64_t>(failures())), fmt_fixed(mean_cold_iterations(), 1),
               fmt_fixed(mean_warm_iterations(), 1), fmt_percent(iteration_ratio()),
               fmt_percent(mean_instance_ratio()), format_sci(ct, 3), format_sci(wt, 3),
               format_sci(it, 3), fmt_percent(time_ratio())});
    return t;
}

Table WarmStartReport::instance_table() const {
    Table t;
    t.title = "Warm-start per instance";
    t.notes.push_back(kWarmStartNote);
    t.columns = {"instance",  "cold iters", "warm iters",    "cold time (s)", "warm time (s)",
                 "inf. time (s)", "objective", "max violation", "l2 to reference", "error"};
    for (const auto& r : rows) {
        t.add_row({fmt_int(static_cast<std::int64_t>(r.instance)), fmt_int(r.cold_iterations),
                   fmt_int(r.warm_iterations), format_sci(r.cold_time, 6),
                   format_sci(r.warm_time, 6), format_sci(r.inference_time, 6),
                   format_double(r.objective), format_double(r.max_violation),
                   r.l2_to_reference ? format_double(*r.l2_to_reference) : "",
                   r.error});
    }
    return t;
}

Table WarmStartReport::quality_table() const {
    Table t;
    t.title = "Prediction quality";
    t.columns = {"obj.", "max viol.", "l2 norm", "inf. time (s)"};
    if (rows.empty()) return t;
    std::vector<double> l2;
    for (const auto& r : rows) {
        if (r.l2_to_reference) l2.push_back(*r.l2_to_reference);
    }
    double max_viol = 0.0;
    for (const auto& r : rows) max_viol = std::max(max_viol, r.max_violation);
    t.add_row({fmt_fixed(mean_ok(rows, [](const WarmStartRow& r) { return r.objective; }), 3),
               format_sci(max_viol, 2), l2.empty() ? "" : format_sci(mean(l2), 2),
               format_sci(mean_ok(rows, [](const WarmStartRow& r) { return r.inference_time; }), 3)});
    return t;
}

// ---------------------------------------------------------------------------

AblationReport ablate_layers(const std::vector<LabeledInstance>& train_set,
                             const std::vector<LabeledInstance>& val_set,
                             const std::vector<MonotoneData>& test_set,
                             const std::vector<std::size_t>& test_ids,
                             const std::vector<std::optional<PrimalDual>>& test_labels,
                             const std::vector<int>& layer_counts, const TrainConfig& cfg,
                             const EvalOptions& eval) {
    if (layer_counts.empty()) throw std::invalid_argument("ablate_layers: empty layer list");
    AblationReport rep;
    for (int layers : layer_counts) {
        TrainConfig c = cfg;
        c.layers = layers;
        const TrainResult tr = train(train_set, val_set, c);
        const WarmStartReport ws = evaluate_warm_start(test_set, test_ids, test_labels, tr.best, eval);
        AblationRow row;
        row.layers = layers;
        row.epochs = static_cast<int>(tr.log.size());
        row.best_epoch = tr.best_epoch;
        row.best_val_loss = tr.best_val_loss;
        row.iteration_ratio = ws.iteration_ratio();
        row.time_ratio = ws.time_ratio();
        row.mean_warm_iterations = ws.mean_warm_iterations();
        row.mean_cold_iterations = ws.mean_cold_iterations();
        rep.rows.push_back(row);
    }
    return rep;
}

Table AblationReport::table() const {
    Table t;
    t.title = "Warm-start gain by layer count";
    t.notes.push_back(kWarmStartNote);
    t.columns = {"layers", "epochs", "best epoch", "best val loss", "cold iters", "warm iters",
                 "ratio", "time ratio"};
    for (const auto& r : rows) {
        t.add_row({fmt_int(r.layers), fmt_int(r.epochs), fmt_int(r.best_epoch),
                   format_sci(r.best_val_loss, 4), fmt_fixed(r.mean_cold_iterations, 1),
                   fmt_fixed(r.mean_warm_iterations, 1), fmt_percent(r.iteration_ratio),
                   fmt_percent(r.time_ratio)});
    }
    return t;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("spearman: length mismatch");
    if (a.size() < 2) return 0.0;
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double ma = mean(ra), mb = mean(rb);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace drgd
