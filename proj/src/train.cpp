#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "drgd/net.hpp"

namespace drgd {

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("TrainConfig: " + what); };
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (patience < 1) fail("patience must be >= 1");
    if (max_epochs < 0) fail("max_epochs must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        fail("Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) fail("adam_eps must be > 0");
    if (!(eta_prior > 0.0)) fail("eta_prior must be > 0");
    if (unroll_steps < 1) fail("unroll_steps must be >= 1");
    if (layers < 1 || width < 1) fail("layers and width must be >= 1");
    if (lr_boost_after < 0 || !(lr_boost_factor > 0.0)) fail("invalid learning-rate boost");
}

AdamState AdamState::for_params(const NetParams& p) {
    return {p.zeros_like(), p.zeros_like(), 0};
}

void adam_step(NetParams& params, const NetParams& grads, AdamState& state, double learning_rate,
               const TrainConfig& cfg) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    zip_tensors(params, grads, [&](Matrix& p, const Matrix& g) {
        if (p.rows() != g.rows() || p.cols() != g.cols()) {
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        }
    });
    // Walk the three parameter sets in lockstep.
    std::vector<Matrix*> ps, ms, vs;
    std::vector<const Matrix*> gs;
    for_each_tensor(params, [&](const std::string&, Matrix& t) { ps.push_back(&t); });
    for_each_tensor(state.m, [&](const std::string&, Matrix& t) { ms.push_back(&t); });
    for_each_tensor(state.v, [&](const std::string&, Matrix& t) { vs.push_back(&t); });
    for_each_tensor(grads, [&](const std::string&, const Matrix& t) { gs.push_back(&t); });
    if (ms.size() != ps.size() || vs.size() != ps.size() || gs.size() != ps.size()) {
        throw std::invalid_argument("adam_step: moment state does not match parameters");
    }
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Matrix& m = *ms[i];
        Matrix& v = *vs[i];
        const Matrix& g = *gs[i];
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        const auto mhat = m.array() / bc1;
        const auto vhat = v.array() / bc2;
        ps[i]->array() -= learning_rate * mhat / (vhat.sqrt() + cfg.adam_eps);
    }
}

double evaluate_loss(const NetParams& params, const std::vector<LabeledInstance>& set) {
    if (set.empty()) throw std::invalid_argument("evaluate_loss: empty set");
    std::vector<PrimalDual> preds, labels;
    preds.reserve(set.size());
    labels.reserve(set.size());
    for (const auto& s : set) {
        auto r = forward(s.data, params);
        preds.push_back({std::move(r.x_hat), std::move(r.y_hat)});
        labels.push_back(s.label);
    }
    return loss(preds, labels);
}

namespace {

void check_set(const std::vector<LabeledInstance>& set, const char* name) {
    if (set.empty()) throw std::invalid_argument(std::string("train: empty ") + name + " split");
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto& s = set[i];
        if (s.label.x.size() != s.data.n || s.label.y.size() != s.data.m) {
            std::ostringstream os;
            os << "train: " << name << " instance " << i << " has a missing or malformed label";
            throw std::invalid_argument(os.str());
        }
    }
}

}  // namespace

TrainResult train(const std::vector<LabeledInstance>& train_set,
                  const std::vector<LabeledInstance>& val_set, const TrainConfig& cfg,
                  std::optional<NetParams> initial, const EpochCallback& on_epoch) {
    cfg.validate();
    check_set(train_set, "train");
    check_set(val_set, "validation");

    NetParams params = initial ? std::move(*initial)
                               : init_params(cfg.layers, cfg.width, cfg.seed, cfg.init,
                                             cfg.eta_prior, cfg.init_noise, cfg.unroll_steps);
    params.unroll_steps = cfg.unroll_steps;
    params.check_consistent();

    TrainResult res;
    res.initial_val_loss = evaluate_loss(params, val_set);
    res.best_val_loss = res.initial_val_loss;
    res.best = params;
    res.best_epoch = 0;

    AdamState adam = AdamState::for_params(params);
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double lr = cfg.learning_rate;
    bool boosted = false;
    int stale = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double train_sum = 0.0;
        bool diverged = false;
        try {
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                NetParams grad = params.zeros_like();
                for (std::size_t k = start; k < end; ++k) {
                    const auto& s = train_set[order[k]];
                    const auto fw = forward(s.data, params);
                    train_sum += loss({{fw.x_hat, fw.y_hat}}, {s.label});
                    const NetParams g = backward(s.data, params, fw.cache, s.label);
                    zip_tensors(grad, g, [](Matrix& acc, const Matrix& gi) { acc += gi; });
                }
                const double scale = 1.0 / static_cast<double>(end - start);
                for_each_tensor(grad, [&](const std::string&, Matrix& t) { t *= scale; });
                adam_step(params, grad, adam, lr, cfg);
            }
        } catch (const NonFiniteActivation&) {
            diverged = true;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_sum / static_cast<double>(train_set.size());
        rec.learning_rate = lr;
        rec.val_loss = std::numeric_limits<double>::infinity();
        if (diverged) {
            rec.train_loss = rec.val_loss;
        } else {
            try {
                rec.val_loss = evaluate_loss(params, val_set);
            } catch (const NonFiniteActivation&) {
            }
        }
        if (rec.val_loss < res.best_val_loss) {
            res.best_val_loss = rec.val_loss;
            res.best = params;
            res.best_epoch = epoch;
            rec.best = true;
            stale = 0;
        } else {
            ++stale;
        }
        res.log.push_back(rec);
        if (on_epoch) on_epoch(rec, params);

        if (!std::isfinite(rec.val_loss)) break;
        if (cfg.lr_boost_after > 0 && !boosted && stale >= cfg.lr_boost_after) {
            lr *= cfg.lr_boost_factor;
            boosted = true;
            stale = 0;
        }
        if (stale >= cfg.patience) break;
    }
    // The best flag must mark only the minimum row.
    for (auto& r : res.log) r.best = r.epoch == res.best_epoch;
    res.last = std::move(params);
    return res;
}

std::string training_log_csv(const std::vector<EpochRecord>& log) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,train_loss,val_loss,best\n";
    for (const auto& r : log) {
        os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << (r.best ? 1 : 0) << '\n';
    }
    return os.str();
}

}  // namespace drgd
