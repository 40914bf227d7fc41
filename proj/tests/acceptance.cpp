// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "drgd/bench.hpp"
#include "drgd/datagen.hpp"
#include "drgd/net.hpp"
#include "drgd/report.hpp"
#include "helpers.hpp"

using namespace drgd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string str(double v) { return format_sci(v, 3); }

double elapsed(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Outcome with_budget(Outcome o, double seconds, double limit) {
    o.detail += "; " + format_sci(seconds, 2) + " s (limit " + format_double(limit) + " s)";
    if (seconds > limit) o.pass = false;
    return o;
}

std::vector<MonotoneData> desk_instances() {
    std::vector<MonotoneData> out;
    for (int i = 0; i < 10; ++i) out.push_back(testutil::random_data(1000 + i, 10, 3, 4));
    return out;
}

// ---------------------------------------------------------------------------

Outcome operator_form() {
    double worst = 0.0;
    std::mt19937_64 rng(1);
    for (const auto& d : desk_instances()) {
        SolverConfig cfg;
        cfg.step_mode = StepMode::fixed;
        cfg.fixed_eta = 0.5 * safeguard_cap(d);
        cfg.max_iter = 1;
        for (int s = 0; s < 100; ++s) {
            const IterateState st = testutil::random_state(d, rng);
            const auto rep = drgd_solve(d, cfg, st);
            const Vector ref = dr_operator_apply(d, cfg.fixed_eta, st.u_tilde, st.w);
            worst = std::max(worst, (rep.state.w - ref).lpNorm<Eigen::Infinity>());
        }
    }
    return {worst <= 1e-12, "max coordinate error " + str(worst) + " (tol 1e-12)"};
}

Outcome wolfe() {
    int failures = 0, total = 0;
    std::mt19937_64 rng(2);
    const auto data = desk_instances();
    for (const auto& d : data) {
        for (int s = 0; s < 100; ++s, ++total) {
            const Vector w = testutil::random_vector(rng, d.dim());
            const Vector ut = testutil::random_vector(rng, d.dim());
            const Vector g = lsq_gradient(d, w, ut);
            const double eta = exact_linesearch_step(g, d);
            if (!wolfe_check(d, w, ut, ut - eta * g, eta, 1e-4, 0.9).passed()) ++failures;
        }
    }
    return {failures == 0, std::to_string(failures) + " failures in " + std::to_string(total)};
}

Outcome nonexpansive() {
    double worst = 0.0;
    std::mt19937_64 rng(3);
    for (const auto& d : desk_instances()) {
        const double eta = safeguard_cap(d);
        for (int s = 0; s < 100; ++s) {
            const Vector prev = testutil::random_vector(rng, d.dim());
            const Vector w1 = testutil::random_vector(rng, d.dim());
            const Vector w2 = testutil::random_vector(rng, d.dim());
            const double lhs = (reflected_gradient_map(d, eta, prev, w1) -
                                reflected_gradient_map(d, eta, prev, w2)).norm();
            worst = std::max(worst, lhs / (w1 - w2).norm());
        }
    }
    return {worst <= 1.0 + 1e-10, "max ratio |R w1 - R w2| / |w1 - w2| = " +
                                      format_double(worst)};
}

struct ParityRun {
    ComparisonReport report;
    double seconds = 0.0;
};

const ParityRun& parity_run() {
    static const ParityRun run = [] {
        ParityRun r;
        const auto t0 = Clock::now();
        CompareOptions opt;
        opt.steps = {1, 2, 5, 10};
        opt.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
        const auto data = testutil::qp_rhs_instances(50, 20, 0);
        std::vector<std::size_t> ids(data.size());
        std::iota(ids.begin(), ids.end(), std::size_t{0});
        r.report = compare(data, ids, opt);
        r.seconds = elapsed(t0);
        return r;
    }();
    return run;
}

Outcome convergence_parity() {
    const auto& run = parity_run();
    const auto& rep = run.report;
    double obj_gap = 0.0, viol = 0.0;
    for (const auto& r : rep.rows) {
        obj_gap = std::max(obj_gap, std::abs(r.dr.objective - r.drgd.objective));
        viol = std::max({viol, r.drgd.max_eq_viol, r.drgd.max_ineq_viol});
    }
    const double ratio = rep.iteration_ratio();
    Outcome o;
    o.pass = rep.all_converged() && obj_gap <= 1e-3 && viol <= 1e-5 && ratio >= 1.0 && ratio <= 2.0;
    std::ostringstream os;
    os << "all converged " << (rep.all_converged() ? "yes" : "no") << ", mean DR iters "
       << format_double(rep.mean_dr_iterations()) << ", mean DR-GD iters "
       << format_double(rep.mean_drgd_iterations(0)) << ", ratio " << format_double(ratio)
       << " (per-instance mean " << format_double(rep.mean_instance_ratio())
       << "), max |obj gap| " << str(obj_gap) << ", max DR-GD violation " << str(viol);
    o.detail = os.str();
    return with_budget(o, run.seconds, 300);
}

Outcome multi_step() {
    const auto& rep = parity_run().report;
    std::vector<double> means;
    for (std::size_t i = 0; i < rep.options.steps.size(); ++i) {
        means.push_back(rep.mean_drgd_iterations(i));
    }
    bool ok = rep.all_converged();
    std::ostringstream os;
    os << "mean iterations for steps {1,2,5,10}:";
    for (std::size_t i = 0; i < means.size(); ++i) {
        os << ' ' << format_double(means[i]);
        if (i > 0 && !(means[i] <= 1.02 * means[i - 1])) ok = false;
    }
    return {ok, os.str()};
}

Outcome emulation() {
    double worst = 0.0;
    for (const auto& d : desk_instances()) {
        const double eta = 0.5 * safeguard_cap(d);
        const auto r = forward(d, emulation_params(d, eta, 4));
        SolverConfig cfg;
        cfg.step_mode = StepMode::fixed;
        cfg.fixed_eta = eta;
        const DrgdStepper stepper(d, cfg);
        IterateState s = net_initial_state(d);
        for (int k = 0; k < 4; ++k) stepper.step(s);
        worst = std::max(worst, (r.output() - s.u).lpNorm<Eigen::Infinity>());
    }
    return {worst <= 1e-12, "max coordinate error " + str(worst) + " (tol 1e-12)"};
}

Outcome gradient_fidelity() {
    const auto d = testutil::random_data(7, 3, 1, 2);
    if (d.dim() != 12) return {false, "test instance has n+m = " + std::to_string(d.dim())};
    std::mt19937_64 rng(7);
    NetParams p = init_params(2, 4, 7, InitScheme::algorithm_consistent, 0.05, 0.1);
    for (auto& l : p.layer) {
        l.b_eta = testutil::random_matrix(rng, 1, 4, 0.5);
        l.U_eta = testutil::random_matrix(rng, 4, 4, 0.3);
    }
    p.P_u = Matrix::Constant(4, 1, 0.25) + testutil::random_matrix(rng, 4, 1, 0.1);
    const PrimalDual label{testutil::random_vector(rng, d.n), testutil::random_vector(rng, d.m)};

    auto loss_at = [&](const NetParams& q) {
        const auto f = forward(d, q);
        return loss({{f.x_hat, f.y_hat}}, {label});
    };
    const auto fw = forward(d, p);
    const NetParams g = backward(d, p, fw.cache, label);
    std::vector<const Matrix*> grads;
    for_each_tensor(g, [&](const std::string&, const Matrix& t) { grads.push_back(&t); });
    double worst = 0.0;
    std::size_t checked = 0, k = 0;
    NetParams probe = p;
    const double h = 1e-5;
    for_each_tensor(probe, [&](const std::string&, Matrix& t) {
        const Matrix& gt = *grads[k++];
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double orig = t.data()[i];
            t.data()[i] = orig + h;
            const double fp = loss_at(probe);
            t.data()[i] = orig - h;
            const double fm = loss_at(probe);
            t.data()[i] = orig;
            const double fd = (fp - fm) / (2 * h);
            const double an = gt.data()[i];
            if (std::abs(fd) < 1e-8 && std::abs(an) < 1e-8) continue;
            worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(fd), std::abs(an)));
            ++checked;
        }
    });
    return {worst <= 1e-4, "max relative error " + str(worst) + " over " + std::to_string(checked) +
                               " entries (tol 1e-4)"};
}

// ---------------------------------------------------------------------------
// End-to-end training (criteria 8 and 9)

struct SeedRun {
    std::uint64_t seed = 0;
    double test_ratio = 0.0;
    double spearman = 0.0;
    int epochs = 0;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    std::size_t samples = 0;
};

struct EndToEnd {
    std::vector<SeedRun> runs;
    double seconds = 0.0;
    std::string error;
};

const EndToEnd& end_to_end() {
    static const EndToEnd result = [] {
        EndToEnd e;
        const auto t0 = Clock::now();
        try {
            GenSpec spec;
            spec.family = Family::qp_rhs;
            spec.n = 50;
            spec.count = 68;
            spec.seed = 0;
            DatasetBundle b = generate(spec);
            LabelOptions lo;
            lo.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
            label_bundle(b, lo);
            split_bundle(b, {}, 0);
            const auto train_set = labeled_instances(b, b.split.train);
            const auto val_set = labeled_instances(b, b.split.val);
            const auto test_data = assemble_instances(b, b.split.test);
            std::vector<MonotoneData> val_data;
            for (const auto& v : val_set) val_data.push_back(v.data);
            // Step prior: twice the smallest safe step, so the untrained gate
            // (1/2) starts every layer at a stable DR-GD step.
            double cap = std::numeric_limits<double>::infinity();
            for (const auto& t : train_set) cap = std::min(cap, safeguard_cap(t.data));

            for (std::uint64_t seed : {0, 1, 2}) {
                TrainConfig cfg;
                cfg.layers = 4;
                cfg.width = 8;
                cfg.learning_rate = 1e-5;
                cfg.lr_boost_after = 3;
                cfg.lr_boost_factor = 10.0;
                cfg.seed = seed;
                cfg.eta_prior = 2.0 * cap;
                cfg.max_epochs = 2000;
                std::vector<double> neg_loss, ratios;
                const EvalOptions eval;
                auto monitor = [&](const EpochRecord& r, const NetParams& current) {
                    if (r.epoch % 5 != 0 || !std::isfinite(r.val_loss)) return;
                    neg_loss.push_back(-r.val_loss);
                    ratios.push_back(warm_start_iteration_ratio(val_data, current, eval));
                };
                const TrainResult tr = train(train_set, val_set, cfg, std::nullopt, monitor);
                SeedRun run;
                run.seed = seed;
                run.epochs = static_cast<int>(tr.log.size());
                run.best_epoch = tr.best_epoch;
                run.best_val_loss = tr.best_val_loss;
                run.test_ratio = warm_start_iteration_ratio(test_data, tr.best, eval);
                run.spearman = spearman(neg_loss, ratios);
                run.samples = ratios.size();
                e.runs.push_back(run);
            }
        } catch (const std::exception& ex) {
            e.error = ex.what();
        }
        e.seconds = elapsed(t0);
        return e;
    }();
    return result;
}

Outcome warm_start_gain() {
    const auto& e = end_to_end();
    if (!e.error.empty()) return {false, "error: " + e.error};
    int passed = 0;
    std::ostringstream os;
    os << "test iteration ratio per seed:";
    for (const auto& r : e.runs) {
        os << " seed " << r.seed << " = " << format_sci(r.test_ratio, 3) << " (" << r.epochs
           << " epochs, best epoch " << r.best_epoch << ", val loss " << format_sci(r.best_val_loss, 3)
           << ")";
        if (r.test_ratio >= 0.20) ++passed;
    }
    os << "; " << passed << "/3 >= 0.20";
    return with_budget({passed >= 2, os.str()}, e.seconds, 900);
}

Outcome loss_ratio_comovement() {
    const auto& e = end_to_end();
    if (!e.error.empty()) return {false, "error: " + e.error};
    int positive = 0;
    std::ostringstream os;
    os << "Spearman(-val loss, val ratio) per seed:";
    for (const auto& r : e.runs) {
        os << " seed " << r.seed << " = " << format_sci(r.spearman, 3) << " (" << r.samples
           << " samples)";
        if (r.spearman > 0.0) ++positive;
    }
    os << "; " << positive << "/3 > 0";
    return {positive >= 2, os.str()};
}

// ---------------------------------------------------------------------------

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string directory_digest(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += f.filename().string() + "\n" + read_file(f);
    return all;
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "drgd_acceptance_determinism";
    fs::remove_all(root);
    std::vector<std::string> problems;
    for (Family f : {Family::qp_rhs, Family::qp_perturbed, Family::portfolio}) {
        GenSpec spec;
        spec.family = f;
        spec.n = 10;
        spec.k = 1;
        spec.count = 12;
        spec.seed = 42;
        std::string digest[2];
        for (int rep = 0; rep < 2; ++rep) {
            DatasetBundle b = generate(spec);
            label_bundle(b);
            split_bundle(b, {6, 2, 4}, 9);
            const fs::path dir = root / (std::string(to_string(f)) + std::to_string(rep));
            write_bundle(b, dir);
            digest[rep] = directory_digest(dir);
            const DatasetBundle back = read_bundle(dir);
            for (std::size_t i = 0; i < b.instances.size(); ++i) {
                const auto& a = b.instances[i];
                const auto& c = back.instances[i];
                if (!(a.P == c.P && a.c == c.c && a.A_eq == c.A_eq && a.b_eq == c.b_eq &&
                      a.G == c.G && a.h == c.h && a.l == c.l && a.u == c.u)) {
                    problems.push_back(std::string(to_string(f)) + " instance " +
                                       std::to_string(i) + " not lossless");
                }
            }
        }
        if (digest[0] != digest[1]) problems.push_back(std::string(to_string(f)) + " bundle differs");
    }

    // Checkpoints and reports.
    const NetParams p = init_params(3, 5, 11, InitScheme::random);
    save_checkpoint(p, root / "a.json");
    save_checkpoint(load_checkpoint(root / "a.json"), root / "b.json");
    if (read_file(root / "a.json") != read_file(root / "b.json")) problems.push_back("checkpoint");
    if (checkpoint_to_string(init_params(3, 5, 11, InitScheme::random)) != read_file(root / "a.json")) {
        problems.push_back("checkpoint re-run");
    }
    CompareOptions opt;
    opt.steps = {1, 2};
    const auto data = testutil::qp_rhs_instances(6, 3, 5);
    const std::vector<std::size_t> ids{0, 1, 2};
    const auto r1 = compare(data, ids, opt), r2 = compare(data, ids, opt);
    for (auto fmt : {ReportFormat::csv, ReportFormat::markdown}) {
        if (render(r1.instance_table(), fmt) != render(r2.instance_table(), fmt) ||
            render(r1.steps_table(), fmt) != render(r2.steps_table(), fmt)) {
            problems.push_back("report");
        }
    }
    fs::remove_all(root);
    std::string detail = problems.empty() ? "bundles, splits, checkpoints and reports identical"
                                          : "mismatch:";
    for (const auto& s : problems) detail += " " + s + ";";
    return {problems.empty(), detail};
}

Outcome invariants() {
    std::vector<std::string> problems;
    std::mt19937_64 rng(11);
    for (int inst = 0; inst < 10; ++inst) {
        const auto d = testutil::random_data(2000 + inst, 8, 2, 3);
        const Matrix dense = d.I_plus_M.to_dense();
        for (int s = 0; s < 20; ++s) {
            // Adjoint identity <A x, y> = <x, A' y>.
            const Vector x = testutil::random_vector(rng, d.dim());
            const Vector y = testutil::random_vector(rng, d.dim());
            const double lhs = spmv(d.I_plus_M, x).dot(y), rhs = x.dot(spmv_t(d.I_plus_M, y));
            if (std::abs(lhs - rhs) > 1e-12 * std::max(1.0, std::abs(lhs))) problems.push_back("adjoint");
            if ((spmv(d.I_plus_M, x) - dense * x).lpNorm<Eigen::Infinity>() > 1e-12) problems.push_back("spmv");

            // Projection idempotent and 1-Lipschitz.
            const Vector px = project_cone_dual(x, d.n, d.cone);
            if (project_cone_dual(px, d.n, d.cone) != px) problems.push_back("idempotence");
            if ((px - project_cone_dual(y, d.n, d.cone)).norm() > (x - y).norm() * (1 + 1e-15)) {
                problems.push_back("lipschitz");
            }

            // w-update identity and u in C after each iteration.
            IterateState st = testutil::random_state(d, rng);
            SolverConfig cfg;
            const DrgdStepper gd(d, cfg);
            const DrStepper dr(d);
            for (int k = 0; k < 3; ++k) {
                const Vector w_prev = st.w;
                (k % 2 ? dr.step(st) : gd.step(st));
                const Vector expect = w_prev + (st.u - st.u_tilde);
                if ((st.w - expect).lpNorm<Eigen::Infinity>() != 0.0) problems.push_back("w-update");
                if (project_cone_dual(st.u, d.n, d.cone) != st.u) problems.push_back("u in C");
            }
        }
    }
    // Portfolio objective encoding: 1/2 z'Pz + c'z = x'Dx + |y|^2 - mu'x at y = F'x.
    GenSpec spec;
    spec.family = Family::portfolio;
    spec.k = 2;
    spec.count = 5;
    spec.seed = 8;
    const auto b = generate(spec);
    for (const auto& qp : b.instances) {
        const std::int64_t n = 20, k = 2;
        const Matrix a = qp.A_eq.to_dense();
        const Matrix ft = a.topLeftCorner(k, n);
        const Vector dvec = qp.P.to_dense().diagonal().head(n) / 2.0;
        const Vector mu = -qp.c.head(n);
        for (int s = 0; s < 20; ++s) {
            Vector x = testutil::random_vector(rng, n).cwiseAbs();
            x /= x.sum();
            Vector z(n + k);
            z.head(n) = x;
            z.tail(k) = ft * x;
            const double encoded = qp.objective(z);
            const double direct = x.dot(dvec.cwiseProduct(x)) + (ft * x).squaredNorm() - mu.dot(x);
            if (std::abs(encoded - direct) > 1e-12 * std::max(1.0, std::abs(direct))) {
                problems.push_back("portfolio encoding");
            }
            if (!witness_feasible(qp, z, 1e-12)) problems.push_back("portfolio feasibility");
        }
    }
    std::sort(problems.begin(), problems.end());
    problems.erase(std::unique(problems.begin(), problems.end()), problems.end());
    std::string detail = problems.empty() ? "adjoint, projection, w-update, cone membership and "
                                            "portfolio encoding properties hold"
                                          : "violated:";
    for (const auto& s : problems) detail += " " + s;
    return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
        double limit;  ///< seconds; 0 for none
    };
    const std::vector<Criterion> criteria = {
        {1, "operator form equivalence", operator_form, 10},
        {2, "exact step satisfies Wolfe conditions", wolfe, 0},
        {3, "nonexpansiveness under the step cap", nonexpansive, 0},
        {4, "convergence parity on QP(RHS) n=50", convergence_parity, 0},
        {5, "multi-step iteration trend", multi_step, 0},
        {6, "network emulates fixed-step DR-GD", emulation, 10},
        {7, "backward pass matches finite differences", gradient_fidelity, 0},
        {8, "trained warm start iteration ratio", warm_start_gain, 0},
        {9, "validation loss and ratio co-move", loss_ratio_comovement, 0},
        {10, "determinism and lossless round-trips", determinism, 0},
        {11, "invariant suite", invariants, 0},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (c.limit > 0) o = with_budget(o, elapsed(t0), c.limit);
        std::printf("criterion %2d %s: %s -- %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                    o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
