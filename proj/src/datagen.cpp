#include "drgd/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "drgd/parallel.hpp"
#include "drgd/solvers.hpp"

namespace drgd {

namespace {

using nlohmann::json;

constexpr const char* kManifestFormat = "drgd-bundle";
constexpr int kManifestVersion = 1;
constexpr std::uint64_t kBaseStream = 0xBA5E;

/// Independent generator for (seed, stream): sample i uses stream i + 1.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double gaussian(std::mt19937_64& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Each entry is kept with probability `density` and then drawn from N(0, 1).
SparseMatrix random_sparse(std::mt19937_64& rng, std::int64_t rows, std::int64_t cols,
                           double density) {
    std::vector<Triplet> t;
    std::bernoulli_distribution keep(density);
    for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t j = 0; j < cols; ++j) {
            const double v = gaussian(rng);
            if (keep(rng)) t.push_back({i, j, v});
        }
    }
    return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

Vector uniform_vector(std::mt19937_64& rng, std::int64_t n, double lo, double hi) {
    Vector v(n);
    for (std::int64_t i = 0; i < n; ++i) v[i] = uniform(rng, lo, hi);
    return v;
}

struct QpBase {
    StandardQP qp;
    Vector x0;  ///< witness of the base right-hand side
};

QpBase make_qp_base(const GenSpec& spec) {
    auto rng = stream_rng(spec.seed, kBaseStream);
    const std::int64_t n = spec.n;
    const std::int64_t half = n / 2;
    QpBase base;
    auto& qp = base.qp;

    std::vector<Triplet> diag;
    for (std::int64_t i = 0; i < n; ++i) diag.push_back({i, i, uniform(rng, 0.5, 2.0)});
    qp.P = SparseMatrix::from_triplets(n, n, std::move(diag));
    qp.c.resize(n);
    for (std::int64_t i = 0; i < n; ++i) qp.c[i] = gaussian(rng);
    qp.A_eq = random_sparse(rng, half, n, 0.5);
    qp.G = random_sparse(rng, half, n, 0.5);
    qp.l = Vector::Constant(n, -1.0);
    qp.u = Vector::Constant(n, 1.0);

    // h must hold for every sample's x0 in [-0.5, 0.5]^n, so bound G x over
    // the box rather than at a single point.
    qp.h.resize(half);
    for (std::int64_t r = 0; r < half; ++r) {
        double s = 0.0;
        for (std::int64_t k = qp.G.offsets()[r]; k < qp.G.offsets()[r + 1]; ++k) {
            s += std::abs(qp.G.values()[k]);
        }
        qp.h[r] = 0.5 * s + spec.margin;
    }
    base.x0 = uniform_vector(rng, n, -0.5, 0.5);
    qp.b_eq = spmv(qp.A_eq, base.x0);
    return base;
}

SparseMatrix scale_values(const SparseMatrix& a, std::mt19937_64& rng, double w) {
    std::vector<double> v = a.values();
    for (double& x : v) x *= uniform(rng, 1.0 - w, 1.0 + w);
    return a.with_values(std::move(v));
}

Vector scale_values(const Vector& a, std::mt19937_64& rng, double w) {
    Vector v = a;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0) v[i] *= uniform(rng, 1.0 - w, 1.0 + w);
    }
    return v;
}

/// (P + P')/2 on the existing pattern with the diagonal floored at 1e-6.
SparseMatrix symmetrize_with_floor(const SparseMatrix& p) {
    std::vector<double> v = p.values();
    for (std::int64_t r = 0; r < p.rows(); ++r) {
        for (std::int64_t k = p.offsets()[r]; k < p.offsets()[r + 1]; ++k) {
            const auto c = p.indices()[k];
            if (c == r) {
                v[k] = std::max(v[k], 1e-6);
            } else {
                v[k] = 0.5 * (p.values()[k] + p.coeff(c, r));
            }
        }
    }
    return p.with_values(std::move(v));
}

void certify(const StandardQP& qp, const Vector& x, std::size_t index) {
    if (!witness_feasible(qp, x)) {
        throw std::logic_error("generated instance " + std::to_string(index) +
                               " failed its feasibility witness check");
    }
}

std::string instance_file_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "instance_%04zu.json", i);
    return buf;
}

}  // namespace

const char* to_string(Family f) {
    switch (f) {
        case Family::qp_rhs: return "qp_rhs";
        case Family::qp_perturbed: return "qp_perturbed";
        case Family::portfolio: return "portfolio";
    }
    return "unknown";
}

Family parse_family(const std::string& name) {
    std::string s = name;
    std::replace(s.begin(), s.end(), '-', '_');
    if (s == "qp_rhs") return Family::qp_rhs;
    if (s == "qp_perturbed" || s == "qp") return Family::qp_perturbed;
    if (s == "portfolio") return Family::portfolio;
    throw std::invalid_argument("unknown family '" + name +
                                "' (expected qp_rhs, qp_perturbed or portfolio)");
}

void GenSpec::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("GenSpec: " + what); };
    if (count < 1) fail("count must be >= 1");
    if (family == Family::portfolio) {
        if (k < 1) fail("portfolio needs k >= 1");
    } else {
        if (n < 2 || n % 2 != 0) fail("QP families need an even n >= 2");
    }
    if (!(perturbation >= 0.0 && perturbation < 1.0)) fail("perturbation must lie in [0, 1)");
    if (!(margin > 0.0)) fail("margin must be > 0");
}

void DatasetBundle::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("DatasetBundle: " + what); };
    if (labeled() && labels.size() != instances.size()) fail("label count mismatch");
    std::vector<int> seen(instances.size(), 0);
    for (const auto* part : {&split.train, &split.val, &split.test}) {
        for (auto i : *part) {
            if (i >= instances.size()) fail("split index out of range");
            if (seen[i]++) fail("split sets overlap");
        }
    }
}

bool witness_feasible(const StandardQP& qp, const Vector& x, double tol) {
    if (x.size() != qp.n()) return false;
    if (qp.m_eq() > 0) {
        const Vector r = spmv(qp.A_eq, x) - qp.b_eq;
        const double scale = std::max(1.0, qp.b_eq.lpNorm<Eigen::Infinity>());
        if (r.lpNorm<Eigen::Infinity>() > tol * scale) return false;
    }
    if (qp.m_ineq() > 0 && ((spmv(qp.G, x) - qp.h).array() > tol).any()) return false;
    return (x.array() >= qp.l.array() - tol).all() && (x.array() <= qp.u.array() + tol).all();
}

DatasetBundle gen_qp_rhs(const GenSpec& spec) {
    spec.validate();
    if (spec.family != Family::qp_rhs) throw std::invalid_argument("gen_qp_rhs: wrong family");
    const QpBase base = make_qp_base(spec);
    DatasetBundle b;
    b.spec = spec;
    b.instances.reserve(spec.count);
    for (int i = 0; i < spec.count; ++i) {
        auto rng = stream_rng(spec.seed, static_cast<std::uint64_t>(i) + 1);
        const Vector x0 = uniform_vector(rng, spec.n, -0.5, 0.5);
        StandardQP qp = base.qp;
        qp.b_eq = spmv(qp.A_eq, x0);
        certify(qp, x0, i);
        b.instances.push_back(std::move(qp));
    }
    return b;
}

DatasetBundle gen_qp_perturbed(const GenSpec& spec) {
    spec.validate();
    if (spec.family != Family::qp_perturbed) {
        throw std::invalid_argument("gen_qp_perturbed: wrong family");
    }
    const QpBase base = make_qp_base(spec);
    const double w = spec.perturbation;
    DatasetBundle b;
    b.spec = spec;
    b.instances.reserve(spec.count);
    for (int i = 0; i < spec.count; ++i) {
        auto rng = stream_rng(spec.seed, static_cast<std::uint64_t>(i) + 1);
        StandardQP qp = base.qp;
        qp.P = symmetrize_with_floor(scale_values(base.qp.P, rng, w));
        qp.c = scale_values(base.qp.c, rng, w);
        qp.A_eq = scale_values(base.qp.A_eq, rng, w);
        qp.G = scale_values(base.qp.G, rng, w);
        const Vector h_scaled = scale_values(base.qp.h, rng, w);

        // Feasible point near the base witness; w = 0 reproduces the base.
        Vector x0 = base.x0;
        if (w > 0.0) {
            const Vector delta = uniform_vector(rng, spec.n, -0.5, 0.5);
            x0 = (base.x0 + w * delta).cwiseMax(-1.0).cwiseMin(1.0);
        }
        qp.b_eq = spmv(qp.A_eq, x0);
        const Vector gx = spmv(qp.G, x0);
        qp.h = h_scaled;
        for (Eigen::Index r = 0; r < qp.h.size(); ++r) {
            qp.h[r] = std::max(h_scaled[r], gx[r] + spec.margin);
        }
        certify(qp, x0, i);
        b.instances.push_back(std::move(qp));
    }
    return b;
}

DatasetBundle gen_portfolio(const GenSpec& spec) {
    spec.validate();
    if (spec.family != Family::portfolio) throw std::invalid_argument("gen_portfolio: wrong family");
    const std::int64_t k = spec.k;
    const std::int64_t n = 10 * k;
    const std::int64_t nv = n + k;
    const double gamma = 1.0;
    DatasetBundle b;
    b.spec = spec;
    b.instances.reserve(spec.count);
    for (int i = 0; i < spec.count; ++i) {
        auto rng = stream_rng(spec.seed, static_cast<std::uint64_t>(i) + 1);
        StandardQP qp;
        std::vector<Triplet> p;
        for (std::int64_t j = 0; j < n; ++j) p.push_back({j, j, 2.0 * uniform(rng, 0.0, std::sqrt(static_cast<double>(k)))});
        for (std::int64_t j = n; j < nv; ++j) p.push_back({j, j, 2.0});
        qp.P = SparseMatrix::from_triplets(nv, nv, std::move(p));
        qp.c = Vector::Zero(nv);
        for (std::int64_t j = 0; j < n; ++j) qp.c[j] = -gaussian(rng) / gamma;

        // y = F'x  and  1'x = 1.
        const SparseMatrix f = random_sparse(rng, n, k, 0.5);
        const SparseMatrix ft = f.transpose();
        std::vector<Triplet> a;
        for (std::int64_t r = 0; r < k; ++r) {
            for (std::int64_t q = ft.offsets()[r]; q < ft.offsets()[r + 1]; ++q) {
                a.push_back({r, ft.indices()[q], ft.values()[q]});
            }
            a.push_back({r, n + r, -1.0});
        }
        for (std::int64_t j = 0; j < n; ++j) a.push_back({k, j, 1.0});
        qp.A_eq = SparseMatrix::from_triplets(k + 1, nv, std::move(a));
        qp.b_eq = Vector::Zero(k + 1);
        qp.b_eq[k] = 1.0;
        qp.G = SparseMatrix::zero(0, nv);
        qp.h = Vector(0);
        qp.l = Vector::Constant(nv, -kInf);
        qp.u = Vector::Constant(nv, kInf);
        qp.l.head(n).setZero();
        qp.u.head(n).setOnes();

        Vector witness(nv);
        witness.head(n).setConstant(1.0 / static_cast<double>(n));
        witness.tail(k) = spmv_t(f, witness.head(n));
        certify(qp, witness, i);
        b.instances.push_back(std::move(qp));
    }
    return b;
}

DatasetBundle generate(const GenSpec& spec) {
    switch (spec.family) {
        case Family::qp_rhs: return gen_qp_rhs(spec);
        case Family::qp_perturbed: return gen_qp_perturbed(spec);
        case Family::portfolio: return gen_portfolio(spec);
    }
    throw std::invalid_argument("generate: unknown family");
}

ConicQP conic_instance(const DatasetBundle& bundle, std::size_t i) {
    return to_conic(bundle.instances.at(i)).qp;
}

void label_bundle(DatasetBundle& bundle, const LabelOptions& options) {
    const std::size_t count = bundle.instances.size();
    std::vector<std::optional<PrimalDual>> labels(count);
    std::vector<std::string> failure(count);
    SolverConfig cfg;
    cfg.tol_fixed_point = options.tol;
    cfg.max_iter = options.max_iter;
    parallel_for(count, options.jobs, [&](std::size_t i) {
        try {
            const MonotoneData data = assemble_inclusion(conic_instance(bundle, i));
            const SolveReport rep = dr_solve(data, cfg);
            if (rep.status == SolveStatus::converged) {
                labels[i] = PrimalDual{rep.x, rep.y};
            } else {
                failure[i] = std::string(to_string(rep.status)) + ": " + rep.message;
            }
        } catch (const std::exception& e) {
            failure[i] = e.what();
        }
    });
    bundle.labels = std::move(labels);
    bundle.excluded.clear();
    for (std::size_t i = 0; i < count; ++i) {
        if (!bundle.labels[i]) bundle.excluded.push_back({i, failure[i]});
    }
}

void split_bundle(DatasetBundle& bundle, const SplitSizes& sizes, std::uint64_t seed) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < bundle.instances.size(); ++i) {
        const bool excluded = std::any_of(bundle.excluded.begin(), bundle.excluded.end(),
                                          [&](const Exclusion& e) { return e.index == i; });
        if (!excluded) eligible.push_back(i);
    }
    const std::size_t need = sizes.train + sizes.val + sizes.test;
    if (need > eligible.size()) {
        std::ostringstream os;
        os << "split_bundle: requested " << need << " instances (" << sizes.train << "/"
           << sizes.val << "/" << sizes.test << ") but only " << eligible.size()
           << " are available";
        throw std::invalid_argument(os.str());
    }
    std::mt19937_64 rng(seed);
    std::shuffle(eligible.begin(), eligible.end(), rng);
    auto take = [&](std::size_t from, std::size_t len) {
        std::vector<std::size_t> part(eligible.begin() + from, eligible.begin() + from + len);
        std::sort(part.begin(), part.end());
        return part;
    };
    bundle.split.train = take(0, sizes.train);
    bundle.split.val = take(sizes.train, sizes.val);
    bundle.split.test = take(sizes.train + sizes.val, sizes.test);
}

void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir) {
    bundle.validate();
    std::filesystem::create_directories(dir);
    std::vector<std::string> membership(bundle.instances.size(), "none");
    for (auto i : bundle.split.train) membership[i] = "train";
    for (auto i : bundle.split.val) membership[i] = "val";
    for (auto i : bundle.split.test) membership[i] = "test";

    json entries = json::array();
    for (std::size_t i = 0; i < bundle.instances.size(); ++i) {
        InstanceFile f{bundle.instances[i], std::nullopt};
        std::string status = "unlabeled";
        if (bundle.labeled()) {
            f.label = bundle.labels[i];
            status = f.label ? "labeled" : "excluded";
        }
        const auto name = instance_file_name(i);
        write_instance(dir / name, f);
        entries.push_back({{"file", name}, {"split", membership[i]}, {"label", status}});
    }
    json excluded = json::array();
    for (const auto& e : bundle.excluded) excluded.push_back({{"index", e.index}, {"reason", e.reason}});

    const auto& s = bundle.spec;
    json manifest = {
        {"format", kManifestFormat},
        {"version", kManifestVersion},
        {"family", to_string(s.family)},
        {"seed", s.seed},
        {"spec",
         {{"n", s.n}, {"k", s.k}, {"count", s.count}, {"perturbation", s.perturbation},
          {"margin", s.margin}}},
        {"split",
         {{"train", bundle.split.train}, {"val", bundle.split.val}, {"test", bundle.split.test}}},
        {"excluded", std::move(excluded)},
        {"instances", std::move(entries)},
    };
    const auto path = dir / "manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << manifest.dump(1) << "\n";
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

DatasetBundle read_bundle(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const std::string origin = path.string();
    json m;
    try {
        m = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(origin + ": " + e.what());
    }
    DatasetBundle b;
    try {
        if (m.value("format", "") != kManifestFormat) {
            throw FormatError(origin + ": field 'format': not a bundle manifest");
        }
        if (m.at("version").get<int>() != kManifestVersion) {
            throw FormatError(origin + ": field 'version': unsupported manifest version");
        }
        try {
            b.spec.family = parse_family(m.at("family").get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw FormatError(origin + ": field 'family': " + e.what());
        }
        b.spec.seed = m.at("seed").get<std::uint64_t>();
        const auto& s = m.at("spec");
        b.spec.n = s.at("n").get<int>();
        b.spec.k = s.at("k").get<int>();
        b.spec.count = s.at("count").get<int>();
        b.spec.perturbation = s.at("perturbation").get<double>();
        b.spec.margin = s.at("margin").get<double>();
        const auto& sp = m.at("split");
        b.split.train = sp.at("train").get<std::vector<std::size_t>>();
        b.split.val = sp.at("val").get<std::vector<std::size_t>>();
        b.split.test = sp.at("test").get<std::vector<std::size_t>>();
        for (const auto& e : m.at("excluded")) {
            b.excluded.push_back({e.at("index").get<std::size_t>(), e.at("reason").get<std::string>()});
        }
        const auto& entries = m.at("instances");
        if (!entries.is_array()) throw FormatError(origin + ": field 'instances': expected array");
        bool any_label_status = false;
        std::vector<std::optional<PrimalDual>> labels;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            const auto file = e.at("file").get<std::string>();
            const auto status = e.at("label").get<std::string>();
            if (status != "labeled" && status != "excluded" && status != "unlabeled") {
                throw FormatError(origin + ": field 'instances[" + std::to_string(i) +
                                  "].label': unknown status '" + status + "'");
            }
            InstanceFile f = read_instance(dir / file);
            if (status == "labeled" && !f.label) {
                throw FormatError((dir / file).string() + ": field 'label': missing but the manifest marks it labeled");
            }
            any_label_status = any_label_status || status != "unlabeled";
            b.instances.push_back(std::move(f.qp));
            labels.push_back(status == "labeled" ? f.label : std::nullopt);
        }
        if (any_label_status) b.labels = std::move(labels);
    } catch (const json::exception& e) {
        throw FormatError(origin + ": malformed manifest (" + e.what() + ")");
    }
    try {
        b.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(origin + ": " + e.what());
    }
    return b;
}

}  // namespace drgd
