#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "drgd/instance_io.hpp"
#include "drgd/qp_model.hpp"
#include "drgd/solvers.hpp"

namespace drgd {

/// Learnable weights of one unrolled layer. All mixing matrices are d x d,
/// b_eta is 1 x d and is broadcast over the n+m rows.
struct LayerParams {
    Matrix U_ut;
    Matrix U_w;
    Matrix U_eta;
    Matrix b_eta;
    Matrix V_ut;
    Matrix V_w;
    Matrix W_w;
    Matrix W_u;
    Matrix W_ut;
};

/// Full parameter set of the unrolled network plus its fixed step priors.
struct NetParams {
    int layers = 0;
    int width = 0;
    int unroll_steps = 1;
    std::vector<double> eta_prior;  ///< one per layer, not trained
    std::vector<LayerParams> layer;
    Matrix P_u;  ///< d x 1 output map

    /// Same shapes, all tensors zero.
    NetParams zeros_like() const;
    std::int64_t parameter_count() const;
    void check_consistent() const;
};

struct LayerTensor {
    const char* name;
    Matrix LayerParams::*member;
};

inline constexpr LayerTensor kLayerTensors[] = {
    {"U_ut", &LayerParams::U_ut}, {"U_w", &LayerParams::U_w}, {"U_eta", &LayerParams::U_eta},
    {"b_eta", &LayerParams::b_eta}, {"V_ut", &LayerParams::V_ut}, {"V_w", &LayerParams::V_w},
    {"W_w", &LayerParams::W_w},   {"W_u", &LayerParams::W_u},   {"W_ut", &LayerParams::W_ut},
};

/// Visits every trainable tensor in a fixed order with a stable name.
template <class Params, class Fn>
void for_each_tensor(Params& p, Fn&& fn) {
    for (std::size_t l = 0; l < p.layer.size(); ++l) {
        for (const auto& t : kLayerTensors) {
            fn("layer" + std::to_string(l) + "." + t.name, p.layer[l].*(t.member));
        }
    }
    fn(std::string("P_u"), p.P_u);
}

/// Visits matching tensors of two parameter sets (e.g. weights and gradients).
template <class A, class B, class Fn>
void zip_tensors(A& a, B& b, Fn&& fn) {
    for (std::size_t l = 0; l < a.layer.size(); ++l) {
        for (const auto& t : kLayerTensors) {
            fn(a.layer[l].*(t.member), b.layer.at(l).*(t.member));
        }
    }
    fn(a.P_u, b.P_u);
}

enum class InitScheme { algorithm_consistent, random };

/// algorithm_consistent: mixing matrices I + N(0, noise_std^2), b_eta = 0,
/// P_u = ones/d. random: every tensor N(0, 2/d).
NetParams init_params(int layers, int width, std::uint64_t seed,
                      InitScheme scheme = InitScheme::algorithm_consistent,
                      double eta_prior = 0.1, double noise_std = 0.01, int unroll_steps = 1);

/// Width-1 parameters under which the network performs fixed-step DR-GD
/// iterations with step `eta` from its initial state. Requires
/// 0 < eta < safeguard_cap(data).
NetParams emulation_params(const MonotoneData& data, double eta, int layers);

/// The network's starting point: u~ = 0, u = Pi_C(-q), w = q + u.
IterateState net_initial_state(const MonotoneData& data);

class NonFiniteActivation : public std::runtime_error {
public:
    NonFiniteActivation(int layer, const std::string& what)
        : std::runtime_error("non-finite activation in layer " + std::to_string(layer) + ": " + what),
          layer_(layer) {}
    int layer() const { return layer_; }

private:
    int layer_;
};

struct LayerCache {
    Matrix w;                  ///< w^l (input)
    std::vector<Matrix> ut;    ///< inner-step iterates, ut[0] = u~^l, ut.back() = u~^{l+1}
    std::vector<Matrix> grad;  ///< g per inner step
    Matrix gate;               ///< sigma(w U_eta + b_eta)
    Matrix pre_projection;     ///< 2 u~^{l+1} V_ut - w V_w
    Matrix u_next;             ///< u^{l+1}
};

struct ForwardCache {
    int unroll_steps = 1;
    std::vector<LayerCache> layers;
    Matrix u_final;  ///< u^L
};

struct ForwardResult {
    Vector x_hat;
    Vector y_hat;
    ForwardCache cache;

    Vector output() const;  ///< (x_hat; y_hat)
};

ForwardResult forward(const MonotoneData& data, const NetParams& params, int unroll_steps);
inline ForwardResult forward(const MonotoneData& data, const NetParams& params) {
    return forward(data, params, params.unroll_steps);
}

/// 1/(2|batch|) sum_i |x_i - x_i*|^2 + |y_i - y_i*|^2.
double loss(const std::vector<PrimalDual>& preds, const std::vector<PrimalDual>& labels);

/// Gradient of the single-sample loss 1/2 (|x_hat - x*|^2 + |y_hat - y*|^2)
/// with respect to every trainable tensor. eta_prior entries of the result are
/// left zero.
NetParams backward(const MonotoneData& data, const NetParams& params,
                   const ForwardCache& cache, const PrimalDual& label);

struct TrainConfig {
    double learning_rate = 1e-5;
    int batch_size = 2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int max_epochs = 100;
    int patience = 10;
    std::uint64_t seed = 0;
    double eta_prior = 0.1;
    int unroll_steps = 1;
    int layers = 4;
    int width = 128;
    InitScheme init = InitScheme::algorithm_consistent;
    double init_noise = 0.01;
    /// When > 0: multiply the learning rate by lr_boost_factor (once) after this
    /// many consecutive epochs without validation improvement.
    int lr_boost_after = 0;
    double lr_boost_factor = 10.0;

    void validate() const;
};

struct AdamState {
    NetParams m;
    NetParams v;
    std::int64_t t = 0;

    static AdamState for_params(const NetParams& p);
};

/// Bias-corrected Adam update of every trainable tensor, in place.
void adam_step(NetParams& params, const NetParams& grads, AdamState& state, double learning_rate,
               const TrainConfig& cfg);

struct LabeledInstance {
    MonotoneData data;
    PrimalDual label;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;
    bool best = false;
};

struct TrainResult {
    NetParams best;
    NetParams last;
    int best_epoch = 0;  ///< 0 when the initial parameters were never beaten
    double initial_val_loss = 0.0;
    double best_val_loss = 0.0;
    std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&, const NetParams& current)>;

/// Mean loss of `params` over a set of labeled instances.
double evaluate_loss(const NetParams& params, const std::vector<LabeledInstance>& set);

/// Mini-batch Adam with early stopping on validation loss. Keeps the
/// parameters with the lowest validation loss (initial parameters included).
TrainResult train(const std::vector<LabeledInstance>& train_set,
                  const std::vector<LabeledInstance>& val_set, const TrainConfig& cfg,
                  std::optional<NetParams> initial = std::nullopt,
                  const EpochCallback& on_epoch = {});

/// CSV with columns epoch,train_loss,val_loss,best.
std::string training_log_csv(const std::vector<EpochRecord>& log);

inline constexpr int kCheckpointVersion = 1;

struct NetShape {
    int layers;
    int width;
};

void save_checkpoint(const NetParams& params, const std::filesystem::path& path);
/// Throws FormatError on corrupt files, version mismatch or, when `expected`
/// is given, a layer-count / width mismatch.
NetParams load_checkpoint(const std::filesystem::path& path,
                          std::optional<NetShape> expected = std::nullopt);

std::string checkpoint_to_string(const NetParams& params);
NetParams checkpoint_from_string(const std::string& text, const std::string& origin = "<string>",
                                 std::optional<NetShape> expected = std::nullopt);

}  // namespace drgd
