#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drgd/datagen.hpp"
#include "drgd/net.hpp"
#include "drgd/report.hpp"
#include "drgd/solvers.hpp"

namespace drgd {

/// Note placed at the top of every warm-start report.
inline constexpr const char* kWarmStartNote =
    "Warm starts are applied to the built-in Douglas-Rachford solver (exact linear solves); "
    "iteration and time ratios are internal to this solver and not comparable to external "
    "conic solvers.";

/// Assembles the inclusion data of the listed bundle instances.
std::vector<MonotoneData> assemble_instances(const DatasetBundle& bundle,
                                             const std::vector<std::size_t>& indices, int jobs = 1);

/// Pairs instances with their labels. Throws std::invalid_argument naming
/// label_bundle when the bundle (or one of the listed instances) has no label.
std::vector<LabeledInstance> labeled_instances(const DatasetBundle& bundle,
                                               const std::vector<std::size_t>& indices,
                                               int jobs = 1);

// ---------------------------------------------------------------------------
// Algorithm comparison

struct CompareOptions {
    double tol = 1e-6;
    std::int64_t max_iter = 200000;
    std::vector<int> steps{1, 2, 5, 10};
    int jobs = 1;
    bool record_history = false;
};

struct RunSummary {
    std::string status;
    std::int64_t iterations = 0;
    double objective = 0.0;
    double max_eq_viol = 0.0;
    double max_ineq_viol = 0.0;
    std::string message;
};

struct CompareRow {
    std::size_t instance = 0;
    std::int64_t n = 0;
    std::int64_t m = 0;
    RunSummary dr;
    RunSummary drgd;                  ///< one gradient step per iteration
    std::vector<RunSummary> by_steps;  ///< aligned with CompareOptions::steps
    std::vector<double> dr_history;
    std::vector<double> drgd_history;
};

struct ComparisonReport {
    CompareOptions options;
    std::vector<CompareRow> rows;

    /// Mean DR-GD iterations over mean DR iterations on rows where both converged.
    double iteration_ratio() const;
    /// Mean of per-instance DR-GD/DR iteration ratios (both converged).
    double mean_instance_ratio() const;
    double mean_dr_iterations() const;
    double mean_drgd_iterations(std::size_t steps_index) const;
    bool all_converged() const;

    /// One summary row: size, then objective / violations / iterations for
    /// each algorithm, then the ratio.
    Table summary_table() const;
    Table instance_table() const;
    /// Mean iterations per gradient-step count.
    Table steps_table() const;
    Table history_table() const;
};

ComparisonReport compare(const std::vector<MonotoneData>& instances,
                         const std::vector<std::size_t>& ids, const CompareOptions& options);

// ---------------------------------------------------------------------------
// Warm-start evaluation

struct EvalOptions {
    double tol = 1e-6;
    std::int64_t max_iter = 200000;
    /// Project the predicted dual onto the cone before warm starting.
    bool project_prediction = true;
};

struct WarmStartRow {
    std::size_t instance = 0;
    std::string cold_status;
    std::string warm_status;
    std::int64_t cold_iterations = 0;
    std::int64_t warm_iterations = 0;
    double cold_time = 0.0;       ///< seconds
    double warm_time = 0.0;       ///< seconds, solver only
    double inference_time = 0.0;  ///< seconds, network forward pass
    /// Quality of the network prediction (x_hat, Pi(y_hat)).
    double objective = 0.0;
    double max_violation = 0.0;
    std::optional<double> l2_to_reference;
    std::string error;

    bool ok() const { return error.empty(); }
};

struct WarmStartReport {
    EvalOptions options;
    std::vector<WarmStartRow> rows;

    double mean_cold_iterations() const;
    double mean_warm_iterations() const;
    /// 1 - mean(warm) / mean(cold).
    double iteration_ratio() const;
    /// Mean over instances of 1 - warm_i / cold_i.
    double mean_instance_ratio() const;
    /// 1 - mean(warm + inference) / mean(cold).
    double time_ratio() const;
    std::size_t failures() const;

    Table summary_table() const;
    Table instance_table() const;
    /// Objective, max violation, l2 distance and inference time of the predictions.
    Table quality_table() const;
};

/// Per instance: cold DR solve, forward pass, warm DR solve from the
/// prediction. Cold and warm runs share one SolverConfig. Single-threaded so
/// timings are not perturbed.
WarmStartReport evaluate_warm_start(const std::vector<MonotoneData>& instances,
                                    const std::vector<std::size_t>& ids,
                                    const std::vector<std::optional<PrimalDual>>& labels,
                                    const NetParams& params, const EvalOptions& options);

/// Iteration ratio only (no timing), used for monitoring during training.
double warm_start_iteration_ratio(const std::vector<MonotoneData>& instances,
                                  const NetParams& params, const EvalOptions& options);

/// Warm-start state built from a network prediction.
IterateState warm_state_from_prediction(const MonotoneData& data, const ForwardResult& pred,
                                        bool project_prediction);

// ---------------------------------------------------------------------------
// Layer ablation

struct AblationRow {
    int layers = 0;
    int epochs = 0;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    double iteration_ratio = 0.0;
    double time_ratio = 0.0;
    double mean_warm_iterations = 0.0;
    double mean_cold_iterations = 0.0;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    Table table() const;
};

AblationReport ablate_layers(const std::vector<LabeledInstance>& train_set,
                             const std::vector<LabeledInstance>& val_set,
                             const std::vector<MonotoneData>& test_set,
                             const std::vector<std::size_t>& test_ids,
                             const std::vector<std::optional<PrimalDual>>& test_labels,
                             const std::vector<int>& layer_counts, const TrainConfig& cfg,
                             const EvalOptions& eval);

/// Spearman rank correlation (average ranks for ties). Returns 0 when either
/// series is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace drgd
