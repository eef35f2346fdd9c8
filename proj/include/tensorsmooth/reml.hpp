#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tensorsmooth/linalg.hpp"
#include "tensorsmooth/penalty.hpp"
#include "tensorsmooth/solver.hpp"
#include "tensorsmooth/tensor_ops.hpp"

namespace tensorsmooth {

struct TraceEstimatorConfig {
    std::size_t probes = 5;
    std::uint64_t seed = 42;
};

/// Rademacher probe vectors z_1..z_M, drawn once and reused for every
/// smoothing-parameter iteration of a fit.
///
/// Generator: std::mt19937_64 seeded with `seed`; each 64-bit output supplies
/// the signs of 64 consecutive entries, bit b (LSB first) set meaning +1.
class ProbeSet {
public:
    static ProbeSet rademacher(std::size_t count, std::size_t dimension, std::uint64_t seed);
    /// Explicit probes; every entry must be exactly +1 or -1.
    static ProbeSet from_vectors(std::vector<Vector> probes);

    std::size_t size() const noexcept { return probes_.size(); }
    std::size_t dimension() const noexcept { return probes_.empty() ? 0 : probes_.front().size(); }
    std::span<const double> probe(std::size_t m) const { return probes_.at(m); }

private:
    std::vector<Vector> probes_;
};

/// Seed for the probes of additive term `term`; term 0 uses `seed` itself.
std::uint64_t term_seed(std::uint64_t seed, std::size_t term) noexcept;

struct TraceEstimate {
    /// K - (1/M) sum_m z_m^T zbar_m, an estimate of trace(A^{-1} Phi^T W Phi)
    double value = 0.0;
    /// z_m^T zbar_m per probe
    std::vector<double> quadratic_forms;
    std::size_t cg_iterations = 0;
};

/// Hutchinson estimate of trace((Phi^T W Phi + lambda Lambda)^{-1} Phi^T W Phi) through
/// K - trace(A^{-1} lambda Lambda): ztilde_m = lambda Lambda z_m, zbar_m = A^{-1} ztilde_m.
///
/// `system` must be A = Phi^T W Phi + lambda Lambda.  When `warm_starts` is
/// non-empty it holds one vector per probe, used as CG initial guesses and
/// overwritten with the new solutions.
TraceEstimate estimate_trace_correction(const LinearOperator& system, const PenaltyOperator& penalty,
                                        double lambda, const ProbeSet& probes, const CgConfig& cg,
                                        std::span<Vector> warm_starts = {});

TraceEstimate estimate_trace_correction(const TensorDesign& design, const PenaltyOperator& penalty,
                                        double lambda, const ProbeSet& probes, const CgConfig& cg,
                                        std::span<const double> w2 = {});

struct FixedPointConfig {
    double lambda0 = 1.0;
    double tol_lambda = 1e-4;
    /// |dlambda| <= tol instead of |dlambda| <= tol * max(1, lambda)
    bool absolute_tolerance = false;
    std::size_t max_outer = 100;
    CgConfig cg;
    TraceEstimatorConfig trace;
    /// warm-start CG from the previous outer iteration's solutions
    bool warm_start = true;
};

struct IterationRecord {
    double lambda = 0.0;  ///< lambda used in this iteration
    double sigma2_eps = 0.0;
    double sigma2_alpha = 0.0;
    double edf = 0.0;  ///< trace estimate
    double next_lambda = 0.0;
    std::size_t cg_iterations = 0;
};

struct FitState {
    Vector alpha;
    double lambda = 0.0;
    double sigma2_eps = 0.0;
    double sigma2_alpha = 0.0;
    double edf = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::size_t cg_iterations_total = 0;
    std::vector<IterationRecord> history;
};

/// Optional replacement for the stochastic trace: given lambda and the
/// system operator, return trace((Phi^T Phi + lambda Lambda)^{-1} Phi^T Phi).
using TraceFunction = std::function<double(double lambda, const LinearOperator& system)>;

/// lambda trace(Lambda) / trace(Phi^T W Phi).  Past kMaxPenaltyDominance the
/// smoothing parameter is running off to infinity (the fit sits in the penalty
/// null space) and further solves are numerically meaningless.
double penalty_dominance(const TensorDesign& design, const PenaltyOperator& penalty, double lambda,
                         std::span<const double> w2 = {});
inline constexpr double kMaxPenaltyDominance = 1e7;

/// Relative (default) or absolute lambda convergence test.
bool lambda_converged(double previous, double next, double tol, bool absolute) noexcept;

/// Variance fixed-point iteration for alpha and lambda:
///   alpha  <- (Phi^T Phi + lambda Lambda)^{-1} Phi^T y
///   s2_eps <- ||Phi alpha - y||^2 / n
///   s2_a   <- alpha^T Lambda alpha / trace estimate
///   lambda <- s2_eps / s2_a
/// followed by a final coefficient solve at the accepted lambda.
///
/// Throws DegenerateFitError when s2_a (or the new lambda) is not positive or
/// the new lambda exceeds the penalty-dominance bound.
/// Reaching max_outer returns a state with converged = false.
FitState fixed_point_fit(const TensorDesign& design, const PenaltyOperator& penalty,
                         std::span<const double> y, const FixedPointConfig& config = {},
                         const TraceFunction& exact_trace = {});

/// Single penalized solve at fixed lambda.
CgResult solve_penalized(const TensorDesign& design, const PenaltyOperator& penalty,
                         std::span<const double> y, double lambda, const CgConfig& cg,
                         std::span<const double> initial_guess = {});

}  // namespace tensorsmooth
