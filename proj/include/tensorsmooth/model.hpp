#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tensorsmooth/basis.hpp"
#include "tensorsmooth/glm.hpp"
#include "tensorsmooth/linalg.hpp"
#include "tensorsmooth/penalty.hpp"
#include "tensorsmooth/reml.hpp"
#include "tensorsmooth/solver.hpp"
#include "tensorsmooth/table.hpp"

namespace tensorsmooth {

struct DimensionSpec {
    std::string column;
    int n_interior_knots = 10;
    int degree = 3;
    KnotPlacement placement = KnotPlacement::equidistant;
    /// difference penalty order for this dimension
    int difference_order = 2;
    /// basis domain; defaults to the training range widened by 1e-6 relative
    std::optional<std::pair<double, double>> domain;
};

struct TermSpec {
    std::vector<DimensionSpec> dimensions;
    PenaltyKind penalty = PenaltyKind::difference;
    /// keeps lambda fixed at this value instead of estimating it
    std::optional<double> fixed_lambda;
};

struct ModelSpec {
    std::string response = "y";
    std::vector<TermSpec> terms;
    Family family;
    TraceEstimatorConfig trace;
    CgConfig cg;
    double lambda0 = 1.0;
    double tol_lambda = 1e-4;
    bool absolute_tolerance = false;
    std::size_t max_outer = 100;
    double fisher_tol = 1e-6;
    std::size_t fisher_max_iter = 100;
    std::size_t fisher_max_halvings = 20;
    bool warm_start = true;

    /// Throws ConfigError for duplicate columns within a term, empty terms
    /// and out-of-range settings.
    void validate() const;
};

struct TermFit {
    std::vector<UnivariateBasis> bases;
    Vector coefficients;
    double lambda = 0.0;
    bool lambda_fixed = false;
    double sigma2_alpha = 0.0;
    double edf = 0.0;
    bool degenerate = false;
};

struct FitDiagnostics {
    /// fixed_point, glm_fixed_point, additive or fixed_lambda
    std::string path;
    bool converged = false;
    std::size_t outer_iterations = 0;
    std::size_t cg_iterations = 0;
    std::size_t fisher_iterations = 0;
    std::uint64_t probe_seed = 0;
    std::size_t probes = 0;
    /// observation-scale fitted means; not serialized
    Vector fitted;
    std::size_t peak_bytes = 0;
    std::size_t largest_allocation = 0;
    double wall_seconds = 0.0;
};

struct FittedModel {
    ModelSpec spec;
    std::vector<TermFit> terms;
    double sigma2_eps = 0.0;
    FitDiagnostics diagnostics;
};

struct TermDesign {
    std::vector<UnivariateBasis> bases;
    std::shared_ptr<TensorDesign> design;
    std::shared_ptr<PenaltyOperator> penalty;
};

/// Bases, design and penalty of one term on the training data.
TermDesign build_term_design(const TermSpec& spec, const Table& data);

FittedModel fit(const ModelSpec& spec, const Table& data);

/// Mean predictions; DomainError lists every row outside a basis domain.
Vector predict(const FittedModel& model, const Table& data);

/// Linear predictor sum_j s_j(x) without the mean function.
Vector predict_linear(const FittedModel& model, const Table& data);

struct Simulation {
    Table data;
    /// noiseless mean as a function of (x1, ..., xP)
    std::function<double(std::span<const double>)> truth;
};

/// Synthetic data on [0,1]^P with columns x1..xP, y and truth.
///   smooth_2d        sin(2 pi x1) cos(2 pi x2)
///   smooth_3d        sin(2 pi x1) cos(2 pi x2) sin(pi x3)
///   smooth_4d        sin(2 pi x1) cos(2 pi x2) + (x3 - 0.5)(x4 - 0.5)
///   additive_2plus2  sin(2 pi x1) cos(2 pi x2) + cos(pi x3) x4
///   loglink_2d       exp(0.5 + 0.5 sin(2 pi x1) cos(2 pi x2))
/// y = truth + N(0, noise_sd^2).  Uniforms come from std::mt19937_64 as the
/// top 53 bits times 2^-53 and normals from Box-Muller, so tables are
/// identical on every platform.  Throws ConfigError for unknown scenarios.
Simulation simulate(const std::string& scenario, std::size_t n, double noise_sd, std::uint64_t seed);
std::vector<std::string> simulation_scenarios();

/// Model files are JSON, see docs/model-format.md.
inline constexpr int kModelFormatVersion = 1;
std::string serialize_model(const FittedModel& model);
FittedModel deserialize_model(const std::string& text);
void save(const FittedModel& model, const std::string& path);
FittedModel load(const std::string& path);

/// Spec <-> JSON text in the config-file schema.
std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text);

}  // namespace tensorsmooth
