#include "drgd/net.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace drgd {

namespace {

Matrix broadcast_rows(const Vector& v, int width) {
    return v * Eigen::RowVectorXd::Ones(width);
}

void project_rows(Matrix& a, std::int64_t first_nonneg) {
    const auto rows = a.rows() - first_nonneg;
    if (rows > 0) a.bottomRows(rows) = a.bottomRows(rows).cwiseMax(0.0);
}

Matrix sigmoid(const Matrix& z) {
    return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

NetParams NetParams::zeros_like() const {
    NetParams z = *this;
    for_each_tensor(z, [](const std::string&, Matrix& t) { t.setZero(); });
    return z;
}

std::int64_t NetParams::parameter_count() const {
    std::int64_t count = 0;
    for_each_tensor(*this, [&](const std::string&, const Matrix& t) { count += t.size(); });
    return count;
}

void NetParams::check_consistent() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("NetParams: " + what); };
    if (layers < 1 || width < 1) fail("layers and width must be >= 1");
    if (unroll_steps < 1) fail("unroll_steps must be >= 1");
    if (static_cast<int>(layer.size()) != layers) fail("layer count mismatch");
    if (static_cast<int>(eta_prior.size()) != layers) fail("one eta prior per layer required");
    for (double e : eta_prior) {
        if (!(e > 0.0) || !std::isfinite(e)) fail("eta priors must be positive and finite");
    }
    for_each_tensor(*this, [&](const std::string& name, const Matrix& t) {
        const bool is_bias = name.ends_with("b_eta");
        const bool is_out = name == "P_u";
        const Eigen::Index rows = is_bias ? 1 : width;
        const Eigen::Index cols = is_out ? 1 : width;
        if (t.rows() != rows || t.cols() != cols) fail(name + " has wrong shape");
        if (!t.allFinite()) fail(name + " has non-finite entries");
    });
}

NetParams init_params(int layers, int width, std::uint64_t seed, InitScheme scheme,
                      double eta_prior, double noise_std, int unroll_steps) {
    if (layers < 1 || width < 1) throw std::invalid_argument("init_params: need L >= 1 and d >= 1");
    NetParams p;
    p.layers = layers;
    p.width = width;
    p.unroll_steps = unroll_steps;
    p.eta_prior.assign(layers, eta_prior);
    p.layer.resize(layers);

    std::mt19937_64 rng(seed);
    const double random_std = std::sqrt(2.0 / width);
    auto gaussian = [&](Eigen::Index r, Eigen::Index c, double std) {
        std::normal_distribution<double> normal(0.0, 1.0);
        Matrix m(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) m(i, j) = std * normal(rng);
        return m;
    };

    for (auto& L : p.layer) {
        for (const auto& t : kLayerTensors) {
            Matrix& m = L.*(t.member);
            const bool is_bias = std::string_view(t.name) == "b_eta";
            if (scheme == InitScheme::random) {
                m = gaussian(is_bias ? 1 : width, width, random_std);
            } else if (is_bias) {
                m = Matrix::Zero(1, width);
            } else {
                m = Matrix::Identity(width, width);
                if (noise_std > 0.0) m += gaussian(width, width, noise_std);
            }
        }
    }
    if (scheme == InitScheme::random) {
        p.P_u = gaussian(width, 1, random_std);
    } else {
        p.P_u = Matrix::Constant(width, 1, 1.0 / width);
    }
    return p;
}

NetParams emulation_params(const MonotoneData& data, double eta, int layers) {
    const double cap = safeguard_cap(data);
    if (!(eta > 0.0 && eta < cap)) {
        std::ostringstream os;
        os << "emulation_params: eta must lie in (0, " << cap << "), got " << eta;
        throw std::invalid_argument(os.str());
    }
    NetParams p = init_params(layers, 1, 0, InitScheme::algorithm_consistent, 2.0 * eta, 0.0);
    for (auto& L : p.layer) L.U_eta.setZero();
    p.P_u.setOnes();
    return p;
}

IterateState net_initial_state(const MonotoneData& data) {
    IterateState s;
    s.u_tilde = Vector::Zero(data.dim());
    s.u = project_cone_dual(-data.q, data.n, data.cone);
    s.w = data.q + s.u;
    return s;
}

Vector ForwardResult::output() const {
    Vector out(x_hat.size() + y_hat.size());
    out << x_hat, y_hat;
    return out;
}

ForwardResult forward(const MonotoneData& data, const NetParams& params, int unroll_steps) {
    params.check_consistent();
    if (unroll_steps < 1) throw std::invalid_argument("forward: unroll_steps must be >= 1");
    const int d = params.width;
    const auto& B = data.I_plus_M;
    const auto first_nonneg = nonneg_offset(data.n, data.cone);

    const IterateState init = net_initial_state(data);
    const Matrix Q = broadcast_rows(data.q, d);
    Matrix ut = Matrix::Zero(data.dim(), d);
    Matrix w = broadcast_rows(init.w, d);
    Matrix u = broadcast_rows(init.u, d);

    ForwardResult res;
    res.cache.unroll_steps = unroll_steps;
    res.cache.layers.resize(params.layers);
    for (int l = 0; l < params.layers; ++l) {
        const auto& P = params.layer[l];
        auto& c = res.cache.layers[l];
        const double eta = params.eta_prior[l];

        const Matrix target = w * P.U_w - Q;
        Matrix z = w * P.U_eta;
        z.rowwise() += P.b_eta.row(0);
        c.gate = sigmoid(z);

        c.ut.reserve(unroll_steps + 1);
        c.grad.reserve(unroll_steps);
        c.ut.push_back(ut);
        for (int i = 0; i < unroll_steps; ++i) {
            const Matrix v = c.ut.back() * P.U_ut;
            Matrix g = spmm_t(B, spmm(B, v) - target);
            Matrix next = v - (eta * c.gate).cwiseProduct(g);
            c.grad.push_back(std::move(g));
            c.ut.push_back(std::move(next));
        }
        const Matrix& ut_next = c.ut.back();

        c.pre_projection = 2.0 * ut_next * P.V_ut - w * P.V_w;
        u = c.pre_projection;
        project_rows(u, first_nonneg);
        c.u_next = u;

        c.w = w;
        Matrix w_next = w * P.W_w + (u * P.W_u - ut_next * P.W_ut);
        if (!ut_next.allFinite()) throw NonFiniteActivation(l, "u~");
        if (!w_next.allFinite()) throw NonFiniteActivation(l, "w");
        ut = ut_next;
        w = std::move(w_next);
    }
    res.cache.u_final = u;
    const Vector out = u * params.P_u;
    if (!out.allFinite()) throw NonFiniteActivation(params.layers - 1, "output");
    res.x_hat = out.head(data.n);
    res.y_hat = out.tail(data.m);
    return res;
}

double loss(const std::vector<PrimalDual>& preds, const std::vector<PrimalDual>& labels) {
    if (preds.size() != labels.size()) throw std::invalid_argument("loss: length mismatch");
    if (preds.empty()) throw std::invalid_argument("loss: empty batch");
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].x.size() != labels[i].x.size() || preds[i].y.size() != labels[i].y.size()) {
            throw std::invalid_argument("loss: prediction/label dimension mismatch");
        }
        sum += (preds[i].x - labels[i].x).squaredNorm() + (preds[i].y - labels[i].y).squaredNorm();
    }
    return sum / (2.0 * static_cast<double>(preds.size()));
}

NetParams backward(const MonotoneData& data, const NetParams& params,
                   const ForwardCache& cache, const PrimalDual& label) {
    if (static_cast<int>(cache.layers.size()) != params.layers ||
        cache.u_final.rows() != data.dim() || cache.u_final.cols() != params.width) {
        throw std::invalid_argument("backward: cache does not match parameters");
    }
    if (label.x.size() != data.n || label.y.size() != data.m) {
        throw std::invalid_argument("backward: label dimension mismatch");
    }
    const auto& B = data.I_plus_M;
    const auto first_nonneg = nonneg_offset(data.n, data.cone);
    const auto N = data.dim();
    const int d = params.width;

    Vector target(N);
    target << label.x, label.y;
    const Vector delta = cache.u_final * params.P_u - target;

    NetParams grads = params.zeros_like();
    grads.P_u = cache.u_final.transpose() * delta;

    Matrix g_u = delta * params.P_u.transpose();  // d loss / d u^{l+1}
    Matrix g_ut = Matrix::Zero(N, d);              // d loss / d u~^{l+1}
    Matrix g_w = Matrix::Zero(N, d);               // d loss / d w^{l+1}

    for (int l = params.layers - 1; l >= 0; --l) {
        const auto& P = params.layer[l];
        const auto& c = cache.layers[l];
        auto& G = grads.layer[l];
        const double eta = params.eta_prior[l];
        const Matrix& ut_next = c.ut.back();
        const int steps = static_cast<int>(c.grad.size());

        // w^{l+1} = w W_w + u^{l+1} W_u - u~^{l+1} W_ut
        G.W_w = c.w.transpose() * g_w;
        G.W_u = c.u_next.transpose() * g_w;
        G.W_ut = -ut_next.transpose() * g_w;
        Matrix g_w_in = g_w * P.W_w.transpose();
        Matrix g_u_total = g_u + g_w * P.W_u.transpose();
        Matrix g_cur = g_ut - g_w * P.W_ut.transpose();

        // u^{l+1} = Pi_C(a): pass-through on free rows, active-set mask on
        // nonnegative rows (zero at the kink).
        Matrix g_a = g_u_total;
        for (Eigen::Index j = 0; j < d; ++j) {
            for (Eigen::Index i = first_nonneg; i < N; ++i) {
                if (!(c.pre_projection(i, j) > 0.0)) g_a(i, j) = 0.0;
            }
        }
        // a = 2 u~^{l+1} V_ut - w V_w
        G.V_ut = 2.0 * ut_next.transpose() * g_a;
        G.V_w = -c.w.transpose() * g_a;
        g_cur += 2.0 * g_a * P.V_ut.transpose();
        g_w_in -= g_a * P.V_w.transpose();

        // Inner gradient steps, newest first.
        Matrix g_gate = Matrix::Zero(N, d);
        Matrix g_target = Matrix::Zero(N, d);
        G.U_ut.setZero();
        for (int i = steps - 1; i >= 0; --i) {
            const Matrix& g = c.grad[i];
            Matrix g_v = g_cur;
            g_gate -= eta * g_cur.cwiseProduct(g);
            const Matrix g_g = -eta * c.gate.cwiseProduct(g_cur);
            const Matrix g_r = spmm(B, g_g);
            g_v += spmm_t(B, g_r);
            g_target -= g_r;
            G.U_ut += c.ut[i].transpose() * g_v;
            g_cur = g_v * P.U_ut.transpose();
        }

        // gate = sigmoid(w U_eta + b_eta)
        const Matrix g_z =
            g_gate.cwiseProduct(c.gate).cwiseProduct((1.0 - c.gate.array()).matrix());
        G.U_eta = c.w.transpose() * g_z;
        G.b_eta = g_z.colwise().sum();
        g_w_in += g_z * P.U_eta.transpose();

        // target = w U_w - q 1'
        G.U_w = c.w.transpose() * g_target;
        g_w_in += g_target * P.U_w.transpose();

        g_w = std::move(g_w_in);
        g_ut = std::move(g_cur);
        g_u.setZero();
    }
    return grads;
}

}  // namespace drgd
