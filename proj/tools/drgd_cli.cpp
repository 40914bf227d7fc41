// Command-line driver: dataset generation, labeling, algorithm comparison,
// training and warm-start evaluation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drgd/bench.hpp"
#include "drgd/datagen.hpp"
#include "drgd/net.hpp"
#include "drgd/report.hpp"

namespace fs = std::filesystem;
using namespace drgd;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<int> parse_int_list(const std::string& text, const char* flag) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stoi(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(std::string(flag) + ": '" + item + "' is not an integer");
        }
    }
    if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
    return out;
}

SplitSizes parse_split(const std::string& text) {
    const auto v = parse_int_list(text, "--split");
    if (v.size() != 3 || v[0] < 0 || v[1] < 0 || v[2] < 0) {
        throw UsageError("--split expects three non-negative sizes train,val,test");
    }
    return {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]),
            static_cast<std::size_t>(v[2])};
}

std::vector<std::size_t> select(const DatasetBundle& b, const std::string& subset) {
    if (subset == "train") return b.split.train;
    if (subset == "val") return b.split.val;
    if (subset == "test") return b.split.test;
    if (subset == "all") {
        std::vector<std::size_t> all(b.instances.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
    }
    throw UsageError("--subset must be train, val, test or all");
}

void write_table(const Table& t, ReportFormat f, const fs::path& dir, const std::string& stem) {
    const auto path = dir / (stem + file_extension(f));
    emit_report(t, f, path);
    std::cerr << "wrote " << path.string() << "\n";
}

struct Common {
    std::string out;
    std::string format = "markdown";
    int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--out", c.out, "Output directory (default: $DRGD_OUT or ./drgd_out)")
        ->envname("DRGD_OUT");
    cmd->add_option("--format", c.format, "Report format: csv or markdown")
        ->check(CLI::IsMember({"csv", "markdown", "md"}));
    cmd->add_option("--jobs", c.jobs, "Worker threads for per-instance work")
        ->check(CLI::PositiveNumber);
}

fs::path out_dir(const Common& c) { return c.out.empty() ? fs::path("drgd_out") : fs::path(c.out); }

struct SolverFlags {
    double tol = 1e-6;
    std::int64_t max_iter = 200000;
};

void add_solver(CLI::App* cmd, SolverFlags& s) {
    cmd->add_option("--tol", s.tol, "Fixed-point tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--max-iter", s.max_iter, "Iteration limit")->check(CLI::PositiveNumber);
}

struct TrainFlags {
    int layers = 4;
    int embed = 128;
    double lr = 1e-5;
    int batch = 2;
    int patience = 10;
    int max_epochs = 100;
    std::string eta_prior = "0.1";
    int steps = 1;
    std::uint64_t seed = 0;
    int lr_boost_after = 0;
    std::string init = "algorithm";
};

void add_train(CLI::App* cmd, TrainFlags& t, bool with_layers) {
    if (with_layers) cmd->add_option("--layers", t.layers, "Unrolled layers L")->check(CLI::PositiveNumber);
    cmd->add_option("--embed", t.embed, "Embedding width d")->check(CLI::PositiveNumber);
    cmd->add_option("--lr", t.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--batch", t.batch, "Batch size")->check(CLI::PositiveNumber);
    cmd->add_option("--patience", t.patience, "Early-stopping patience (epochs)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-epochs", t.max_epochs, "Epoch limit")->check(CLI::NonNegativeNumber);
    cmd->add_option("--eta-prior", t.eta_prior,
                    "Per-layer step prior, or 'auto' for twice the smallest safe DR-GD step of "
                    "the training set");
    cmd->add_option("--steps", t.steps, "Gradient steps per layer")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", t.seed, "Initialization and shuffling seed");
    cmd->add_option("--lr-boost-after", t.lr_boost_after,
                    "Multiply the learning rate by 10 after this many epochs without improvement "
                    "(0 disables)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--init", t.init, "Initialization: algorithm or random")
        ->check(CLI::IsMember({"algorithm", "random"}));
}

double resolve_eta_prior(const std::string& text, const std::vector<LabeledInstance>& train_set) {
    if (text == "auto") {
        double cap = std::numeric_limits<double>::infinity();
        for (const auto& s : train_set) cap = std::min(cap, safeguard_cap(s.data));
        std::cerr << "eta prior " << 2.0 * cap << "\n";
        return 2.0 * cap;
    }
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos == text.size() && v > 0.0) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("--eta-prior must be a positive number or 'auto'");
}

TrainConfig to_config(const TrainFlags& t, const std::vector<LabeledInstance>& train_set) {
    TrainConfig c;
    c.layers = t.layers;
    c.width = t.embed;
    c.learning_rate = t.lr;
    c.batch_size = t.batch;
    c.patience = t.patience;
    c.max_epochs = t.max_epochs;
    c.eta_prior = resolve_eta_prior(t.eta_prior, train_set);
    c.unroll_steps = t.steps;
    c.seed = t.seed;
    c.lr_boost_after = t.lr_boost_after;
    c.init = t.init == "random" ? InitScheme::random : InitScheme::algorithm_consistent;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Douglas-Rachford QP solvers, unrolled warm-start network and benchmarks"};
    app.set_config("--config", "", "Read options from a TOML/INI file (flags override it)");
    app.require_subcommand(1);

    // generate ---------------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "Generate, label and split a dataset bundle");
    Common gen_c;
    SolverFlags gen_s;
    gen_s.tol = 1e-9;
    gen_s.max_iter = 500000;
    std::string family;
    GenSpec spec;
    std::string split_text = "40,8,20";
    std::uint64_t split_seed = 0;
    bool no_label = false;
    gen->add_option("--family", family, "qp_rhs, qp_perturbed or portfolio")->required();
    gen->add_option("--n", spec.n, "Variables (QP families, even)");
    gen->add_option("--k", spec.k, "Factors (portfolio; 10k assets)");
    gen->add_option("--count", spec.count, "Number of instances");
    gen->add_option("--seed", spec.seed, "Generator seed");
    gen->add_option("--perturbation", spec.perturbation, "Half-width of perturbation factors");
    gen->add_option("--margin", spec.margin, "Inequality slack at the witness point");
    gen->add_option("--split", split_text, "Split sizes train,val,test");
    gen->add_option("--split-seed", split_seed, "Split seed");
    gen->add_flag("--no-label", no_label, "Skip reference labeling");
    add_solver(gen, gen_s);
    add_common(gen, gen_c);

    // label ------------------------------------------------------------------
    auto* lab = app.add_subcommand("label", "Label a bundle with reference solutions (in place)");
    Common lab_c;
    SolverFlags lab_s;
    lab_s.tol = 1e-9;
    lab_s.max_iter = 500000;
    std::string lab_bundle;
    lab->add_option("--bundle", lab_bundle, "Bundle directory")->required();
    add_solver(lab, lab_s);
    add_common(lab, lab_c);

    // split ------------------------------------------------------------------
    auto* spl = app.add_subcommand("split", "Re-split a bundle (in place)");
    Common spl_c;
    std::string spl_bundle;
    std::string spl_text = "40,8,20";
    std::uint64_t spl_seed = 0;
    spl->add_option("--bundle", spl_bundle, "Bundle directory")->required();
    spl->add_option("--split", spl_text, "Split sizes train,val,test");
    spl->add_option("--seed", spl_seed, "Split seed");
    add_common(spl, spl_c);

    // compare ----------------------------------------------------------------
    auto* cmp = app.add_subcommand("compare", "Compare exact-solve DR with DR-GD");
    Common cmp_c;
    SolverFlags cmp_s;
    std::string cmp_bundle;
    std::string cmp_subset = "all";
    std::string cmp_steps = "1,2,5,10";
    bool cmp_history = false;
    cmp->add_option("--bundle", cmp_bundle, "Bundle directory")->required();
    cmp->add_option("--subset", cmp_subset, "train, val, test or all");
    cmp->add_option("--steps", cmp_steps, "Gradient steps per iteration to compare, e.g. 1,2,5,10");
    cmp->add_flag("--history", cmp_history, "Also write residual histories (long CSV)");
    add_solver(cmp, cmp_s);
    add_common(cmp, cmp_c);

    // train ------------------------------------------------------------------
    auto* trn = app.add_subcommand("train", "Train the unrolled network on a labeled bundle");
    Common trn_c;
    TrainFlags trn_t;
    std::string trn_bundle;
    std::string trn_ckpt;
    trn->add_option("--bundle", trn_bundle, "Bundle directory")->required();
    trn->add_option("--checkpoint", trn_ckpt, "Checkpoint path (default: <out>/checkpoint.json)");
    add_train(trn, trn_t, true);
    add_common(trn, trn_c);

    // eval -------------------------------------------------------------------
    auto* evl = app.add_subcommand("eval", "Warm-start evaluation on the test split");
    Common evl_c;
    SolverFlags evl_s;
    std::string evl_bundle;
    std::string evl_ckpt;
    std::string evl_subset = "test";
    bool evl_raw = false;
    evl->add_option("--bundle", evl_bundle, "Bundle directory")->required();
    evl->add_option("--checkpoint", evl_ckpt, "Trained checkpoint")->required();
    evl->add_option("--subset", evl_subset, "train, val, test or all");
    evl->add_flag("--no-project", evl_raw, "Warm start from the raw dual prediction");
    add_solver(evl, evl_s);
    add_common(evl, evl_c);

    // ablate -----------------------------------------------------------------
    auto* abl = app.add_subcommand("ablate", "Train and evaluate one model per layer count");
    Common abl_c;
    SolverFlags abl_s;
    TrainFlags abl_t;
    std::string abl_bundle;
    std::string abl_layers = "1,2,4";
    abl->add_option("--bundle", abl_bundle, "Bundle directory")->required();
    abl->add_option("--layers", abl_layers, "Layer counts, e.g. 1,2,4");
    add_train(abl, abl_t, false);
    add_solver(abl, abl_s);
    add_common(abl, abl_c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) {
            try {
                spec.family = parse_family(family);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            const SplitSizes sizes = parse_split(split_text);
            try {
                spec.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            DatasetBundle b = generate(spec);
            if (!no_label) {
                label_bundle(b, {gen_s.tol, gen_s.max_iter, gen_c.jobs});
                for (const auto& e : b.excluded) {
                    std::cerr << "excluded instance " << e.index << ": " << e.reason << "\n";
                }
            }
            split_bundle(b, sizes, split_seed);
            const auto dir = out_dir(gen_c);
            write_bundle(b, dir);
            std::cerr << "wrote " << b.instances.size() << " instances to " << dir.string() << "\n";
            return 0;
        }
        if (lab->parsed()) {
            DatasetBundle b = read_bundle(lab_bundle);
            label_bundle(b, {lab_s.tol, lab_s.max_iter, lab_c.jobs});
            for (const auto& e : b.excluded) {
                std::cerr << "excluded instance " << e.index << ": " << e.reason << "\n";
            }
            // Excluded instances must leave the split.
            auto drop = [&](std::vector<std::size_t>& part) {
                std::erase_if(part, [&](std::size_t i) { return !b.labels[i]; });
            };
            drop(b.split.train);
            drop(b.split.val);
            drop(b.split.test);
            write_bundle(b, lab_bundle);
            return b.excluded.empty() ? 0 : kExitRuntime;
        }
        if (spl->parsed()) {
            DatasetBundle b = read_bundle(spl_bundle);
            split_bundle(b, parse_split(spl_text), spl_seed);
            write_bundle(b, spl_bundle);
            return 0;
        }
        if (cmp->parsed()) {
            const DatasetBundle b = read_bundle(cmp_bundle);
            const auto ids = select(b, cmp_subset);
            CompareOptions opt;
            opt.tol = cmp_s.tol;
            opt.max_iter = cmp_s.max_iter;
            opt.steps = parse_int_list(cmp_steps, "--steps");
            opt.jobs = cmp_c.jobs;
            opt.record_history = cmp_history;
            const auto rep = compare(assemble_instances(b, ids, cmp_c.jobs), ids, opt);
            const auto fmt = parse_format(cmp_c.format);
            const auto dir = out_dir(cmp_c);
            write_table(rep.summary_table(), fmt, dir, "comparison");
            write_table(rep.instance_table(), fmt, dir, "comparison_instances");
            write_table(rep.steps_table(), fmt, dir, "comparison_steps");
            if (cmp_history) write_table(rep.history_table(), ReportFormat::csv, dir, "residual_history");
            std::cout << to_markdown(rep.summary_table()) << "\n" << to_markdown(rep.steps_table());
            return rep.all_converged() ? 0 : kExitRuntime;
        }
        if (trn->parsed()) {
            const DatasetBundle b = read_bundle(trn_bundle);
            const auto train_set = labeled_instances(b, b.split.train, trn_c.jobs);
            const auto val_set = labeled_instances(b, b.split.val, trn_c.jobs);
            const TrainConfig cfg = to_config(trn_t, train_set);
            const auto res = train(train_set, val_set, cfg, std::nullopt,
                                   [](const EpochRecord& r, const NetParams&) {
                                       std::cerr << "epoch " << r.epoch << " train "
                                                 << r.train_loss << " val " << r.val_loss
                                                 << (r.best ? " *" : "") << "\n";
                                   });
            const auto dir = out_dir(trn_c);
            fs::create_directories(dir);
            const fs::path ckpt = trn_ckpt.empty() ? dir / "checkpoint.json" : fs::path(trn_ckpt);
            if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
            save_checkpoint(res.best, ckpt);
            const auto log_path = dir / "training_log.csv";
            std::ofstream(log_path) << training_log_csv(res.log);
            std::cerr << "best epoch " << res.best_epoch << " (val loss " << res.best_val_loss
                      << "), wrote " << ckpt.string() << " and " << log_path.string() << "\n";
            return 0;
        }
        if (evl->parsed()) {
            const DatasetBundle b = read_bundle(evl_bundle);
            const auto ids = select(b, evl_subset);
            const NetParams params = load_checkpoint(evl_ckpt);
            EvalOptions opt;
            opt.tol = evl_s.tol;
            opt.max_iter = evl_s.max_iter;
            opt.project_prediction = !evl_raw;
            std::vector<std::optional<PrimalDual>> labels;
            if (b.labeled()) {
                for (auto i : ids) labels.push_back(b.labels[i]);
            }
            // Timings are taken single-threaded regardless of --jobs.
            const auto rep =
                evaluate_warm_start(assemble_instances(b, ids, evl_c.jobs), ids, labels, params, opt);
            const auto fmt = parse_format(evl_c.format);
            const auto dir = out_dir(evl_c);
            write_table(rep.summary_table(), fmt, dir, "warmstart_summary");
            write_table(rep.instance_table(), fmt, dir, "warmstart_instances");
            write_table(rep.quality_table(), fmt, dir, "prediction_quality");
            std::cout << to_markdown(rep.summary_table());
            return rep.failures() == 0 ? 0 : kExitRuntime;
        }
        if (abl->parsed()) {
            const DatasetBundle b = read_bundle(abl_bundle);
            const auto train_set = labeled_instances(b, b.split.train, abl_c.jobs);
            const auto val_set = labeled_instances(b, b.split.val, abl_c.jobs);
            const auto test_ids = b.split.test;
            std::vector<std::optional<PrimalDual>> labels;
            for (auto i : test_ids) labels.push_back(b.labels[i]);
            EvalOptions opt;
            opt.tol = abl_s.tol;
            opt.max_iter = abl_s.max_iter;
            const auto rep = ablate_layers(train_set, val_set, assemble_instances(b, test_ids, abl_c.jobs),
                                           test_ids, labels, parse_int_list(abl_layers, "--layers"),
                                           to_config(abl_t, train_set), opt);
            const auto fmt = parse_format(abl_c.format);
            write_table(rep.table(), fmt, out_dir(abl_c), "ablation");
            std::cout << to_markdown(rep.table());
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
