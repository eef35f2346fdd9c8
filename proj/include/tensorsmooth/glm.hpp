#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tensorsmooth/linalg.hpp"
#include "tensorsmooth/penalty.hpp"
#include "tensorsmooth/reml.hpp"
#include "tensorsmooth/solver.hpp"
#include "tensorsmooth/tensor_ops.hpp"

namespace tensorsmooth {

enum class FamilyKind { gaussian_identity, gaussian_log, poisson_log, binomial_logit };

/// Response distribution and link.  w1 weights the score residual and w2 is
/// the Fisher weight:
///
///   family             mean(eta)         w1         w2
///   gaussian_identity  eta               1          1
///   gaussian_log       exp(eta)          exp(eta)   2 exp(eta)
///   poisson_log        exp(eta)          1          exp(eta)
///   binomial_logit     1/(1+exp(-eta))   1          mu (1 - mu)
class Family {
public:
    Family() = default;
    explicit Family(FamilyKind kind) : kind_(kind) {}
    static Family parse(std::string_view name);

    FamilyKind kind() const noexcept { return kind_; }
    std::string name() const;
    bool is_gaussian_identity() const noexcept { return kind_ == FamilyKind::gaussian_identity; }

    double mean(double eta) const;
    double w1(double eta) const;
    double w2(double eta) const;
    /// sum of unit deviances
    double deviance(std::span<const double> y, std::span<const double> mu) const;
    /// throws InputError naming the first invalid row
    void validate_response(std::span<const double> y) const;
    /// constant linear predictor used as starting value
    double initial_eta(std::span<const double> y) const;

private:
    FamilyKind kind_ = FamilyKind::gaussian_identity;
};

struct AdditiveTerm {
    std::shared_ptr<const TensorDesign> design;
    std::shared_ptr<const PenaltyOperator> penalty;
};

/// Column-wise concatenation Phi = [Phi_(1), ..., Phi_(I)] with the block
/// penalty diag(lambda_(j) Lambda_(j)).  Coefficients are stacked per term.
class AdditiveDesign {
public:
    explicit AdditiveDesign(std::vector<AdditiveTerm> terms);
    /// Non-owning single-term view; `design` and `penalty` must outlive it.
    static AdditiveDesign single(const TensorDesign& design, const PenaltyOperator& penalty);

    std::size_t term_count() const noexcept { return terms_.size(); }
    const AdditiveTerm& term(std::size_t j) const { return terms_.at(j); }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t offset(std::size_t j) const { return offsets_.at(j); }
    std::size_t term_dimension(std::size_t j) const { return terms_.at(j).design->dimension(); }

    std::span<const double> slice(std::span<const double> alpha, std::size_t j) const;
    std::span<double> slice(std::span<double> alpha, std::size_t j) const;

    /// sum_j Phi_(j) alpha_(j)
    void apply_phi(std::span<const double> alpha, std::span<double> out) const;
    Vector apply_phi(std::span<const double> alpha) const;
    /// (Phi_(1)^T y, ..., Phi_(I)^T y)
    void apply_phi_t(std::span<const double> y, std::span<double> out) const;
    Vector apply_phi_t(std::span<const double> y) const;
    /// diag(lambda_(j) Lambda_(j)) alpha
    void apply_penalty(std::span<const double> lambdas, std::span<const double> alpha,
                       std::span<double> out) const;
    /// sum_j lambda_(j) alpha_(j)^T Lambda_(j) alpha_(j)
    double penalty_quadratic_form(std::span<const double> lambdas, std::span<const double> alpha) const;

    /// Phi^T diag(w2) Phi + diag(lambda_(j) Lambda_(j)) with its implicit diagonal.
    /// With several terms the system is singular along constants shifted
    /// between terms; the operator carries a projection that keeps the
    /// coefficients of terms 2..I at zero mean, so CG solves stay definite.
    LinearOperator fit_operator(std::span<const double> lambdas, std::span<const double> w2 = {}) const;

private:
    void check_lambdas(std::span<const double> lambdas) const;

    std::vector<AdditiveTerm> terms_;
    std::vector<std::size_t> offsets_;
    std::size_t rows_ = 0;
    std::size_t dimension_ = 0;
};

struct FisherConfig {
    /// converged when ||score|| <= tol * max(1, ||Phi^T y||)
    double tol = 1e-6;
    std::size_t max_iter = 100;
    std::size_t max_halvings = 20;
    CgConfig cg;
};

struct FisherResult {
    Vector alpha;
    Vector eta;
    Vector mu;
    bool converged = false;
    std::size_t iterations = 0;
    std::size_t cg_iterations = 0;
    std::size_t halvings = 0;
    double score_norm = 0.0;
    double score_scale = 1.0;
    /// penalized deviance at the start and after every accepted step
    std::vector<double> penalized_deviance;
};

/// Starting coefficients: zero for gaussian_identity, otherwise the constant
/// linear predictor Family::initial_eta placed in the first term (B-spline
/// tensor bases reproduce constants through a constant coefficient vector).
Vector initial_coefficients(const AdditiveDesign& design, const Family& family,
                            std::span<const double> y);

/// Penalized Fisher scoring alpha <- alpha + I^{-1} s with
///   I = Phi^T W2 Phi + Lambda(lambda),  s = Phi^T W1 (y - mean(Phi alpha)) - Lambda(lambda) alpha,
/// each step solved by CG and halved (at most max_halvings times) while the
/// penalized deviance increases.
FisherResult fisher_scoring_fit(const AdditiveDesign& design, const Family& family,
                                std::span<const double> y, std::span<const double> lambdas,
                                const FisherConfig& config = {},
                                std::span<const double> initial_alpha = {});

FisherResult fisher_scoring_fit(const TensorDesign& design, const PenaltyOperator& penalty,
                                const Family& family, std::span<const double> y, double lambda,
                                const FisherConfig& config = {},
                                std::span<const double> initial_alpha = {});

/// Deviance plus sum_j lambda_(j) alpha_(j)^T Lambda_(j) alpha_(j).
double penalized_deviance(const AdditiveDesign& design, const Family& family,
                          std::span<const double> y, std::span<const double> lambdas,
                          std::span<const double> alpha);

struct VarianceUpdate {
    double sigma2_eps = 0.0;
    std::vector<double> sigma2_terms;
    std::vector<double> edf;
    std::vector<double> quadratic_forms;
    std::vector<bool> degenerate;
    std::size_t cg_iterations = 0;
};

/// Per-term variances: s2_eps = ||y - mu||^2 / n and
/// s2_(j) = alpha_(j)^T Lambda_(j) alpha_(j) / trace((Phi_(j)^T W2 Phi_(j) + lambda_(j) Lambda_(j))^{-1} Phi_(j)^T W2 Phi_(j)),
/// each trace by Hutchinson on the term's own operator.  Terms with a
/// non-positive numerator or trace are flagged degenerate.  `probes[j]` may be
/// empty for terms that need no estimate (fixed lambda); those are skipped.
VarianceUpdate additive_variance_update(const AdditiveDesign& design, const Family& family,
                                        std::span<const double> y, std::span<const double> alpha,
                                        std::span<const double> lambdas,
                                        std::span<const ProbeSet> probes, const CgConfig& cg,
                                        std::span<std::vector<Vector>> warm_starts = {});

/// Single smooth term; throws DegenerateFitError instead of flagging.
VarianceUpdate glm_variance_update(const TensorDesign& design, const PenaltyOperator& penalty,
                                   const Family& family, std::span<const double> y,
                                   std::span<const double> alpha, double lambda,
                                   const ProbeSet& probes, const CgConfig& cg);

struct AdditiveFitConfig {
    /// one entry per term, or a single value broadcast to all terms
    std::vector<double> lambda0{1.0};
    /// terms whose lambda stays at lambda0
    std::vector<bool> fixed;
    double tol_lambda = 1e-4;
    bool absolute_tolerance = false;
    std::size_t max_outer = 100;
    FisherConfig fisher;
    TraceEstimatorConfig trace;
    /// explicit probe sets, one per term; replaces the seeded draws when set
    std::vector<ProbeSet> probes;
    bool warm_start = true;
};

struct AdditiveIterationRecord {
    std::vector<double> lambdas;
    double sigma2_eps = 0.0;
    std::vector<double> sigma2_terms;
    std::vector<double> edf;
    std::vector<double> next_lambdas;
    std::size_t cg_iterations = 0;
    std::size_t fisher_iterations = 0;
};

struct AdditiveFitState {
    Vector alpha;
    Vector mu;
    std::vector<double> lambdas;
    double sigma2_eps = 0.0;
    std::vector<double> sigma2_terms;
    std::vector<double> edf;
    std::vector<bool> degenerate;
    /// every term that is estimated ended up degenerate
    bool degenerate_stop = false;
    bool converged = false;
    std::size_t iterations = 0;
    std::size_t cg_iterations_total = 0;
    std::size_t fisher_iterations_total = 0;
    std::vector<AdditiveIterationRecord> history;
};

/// Outer fixed point over the lambda vector with fully converged inner fits:
/// gaussian_identity solves the penalized system directly, other families run
/// Fisher scoring.  lambda_(j) <- s2_eps / s2_(j) until every estimated term
/// passes the lambda test.  Degenerate terms keep their lambda; when all
/// estimated terms are degenerate the iteration stops with degenerate_stop.
AdditiveFitState additive_outer_fit(const AdditiveDesign& design, const Family& family,
                                    std::span<const double> y, const AdditiveFitConfig& config = {});

}  // namespace tensorsmooth
