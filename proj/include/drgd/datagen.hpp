#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drgd/instance_io.hpp"
#include "drgd/qp_model.hpp"

namespace drgd {

enum class Family { qp_rhs, qp_perturbed, portfolio };

const char* to_string(Family f);
/// Accepts "qp_rhs", "qp_perturbed", "portfolio" (also with '-' for '_').
/// Throws std::invalid_argument otherwise.
Family parse_family(const std::string& name);

struct GenSpec {
    Family family = Family::qp_rhs;
    int n = 20;  ///< QP families: variables (must be even)
    int k = 2;   ///< portfolio: factors, 10k assets
    int count = 68;
    std::uint64_t seed = 0;
    double perturbation = 0.1;  ///< half-width w of U[1-w, 1+w]
    double margin = 1.0;        ///< inequality slack at the witness point

    void validate() const;
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;

    bool empty() const { return train.empty() && val.empty() && test.empty(); }
};

struct SplitSizes {
    std::size_t train = 40;
    std::size_t val = 8;
    std::size_t test = 20;
};

struct Exclusion {
    std::size_t index;
    std::string reason;
};

struct DatasetBundle {
    GenSpec spec;
    std::vector<StandardQP> instances;
    /// Empty when unlabeled; otherwise one entry per instance, nullopt for
    /// instances whose reference solve failed.
    std::vector<std::optional<PrimalDual>> labels;
    std::vector<Exclusion> excluded;
    Split split;

    bool labeled() const { return !labels.empty(); }
    void validate() const;
};

/// One shared base instance; samples differ only in b_eq = A_eq x0 with
/// x0 ~ U[-0.5, 0.5]^n.
DatasetBundle gen_qp_rhs(const GenSpec& spec);
/// Base instance with every nonzero of P, c, A_eq, G, h scaled by an
/// independent U[1-w, 1+w] factor; b_eq recomputed from a feasible point.
DatasetBundle gen_qp_perturbed(const GenSpec& spec);
/// Markowitz-style factor model with 10k assets and k factors.
DatasetBundle gen_portfolio(const GenSpec& spec);
/// Dispatches on spec.family.
DatasetBundle generate(const GenSpec& spec);

/// Checks A_eq x = b_eq (to 1e-9 relative), G x <= h and l <= x <= u.
bool witness_feasible(const StandardQP& qp, const Vector& x, double tol = 1e-9);

struct LabelOptions {
    double tol = 1e-9;
    std::int64_t max_iter = 500000;
    int jobs = 1;
};

/// Solves every instance with Douglas-Rachford at `tol` and stores the conic
/// (x*, y*). Instances that do not converge are recorded in `excluded`.
void label_bundle(DatasetBundle& bundle, const LabelOptions& options = {});

/// Seeded disjoint split over the instances not in `excluded`. Instances
/// beyond sizes.train + sizes.val + sizes.test stay unassigned.
void split_bundle(DatasetBundle& bundle, const SplitSizes& sizes, std::uint64_t seed);

/// One instance_NNNN.json per instance plus manifest.json.
void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle read_bundle(const std::filesystem::path& dir);

/// Conic form of instance i with the default transformation options.
ConicQP conic_instance(const DatasetBundle& bundle, std::size_t i);

}  // namespace drgd
