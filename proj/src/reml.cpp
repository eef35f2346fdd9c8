#include "tensorsmooth/reml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "tensorsmooth/errors.hpp"

namespace tensorsmooth {

ProbeSet ProbeSet::rademacher(std::size_t count, std::size_t dimension, std::uint64_t seed) {
    if (count == 0) throw InvalidArgument("trace estimation needs at least one probe vector");
    std::mt19937_64 engine(seed);
    ProbeSet set;
    set.probes_.resize(count);
    for (auto& z : set.probes_) {
        z.resize(dimension);
        std::uint64_t bits = 0;
        for (std::size_t k = 0; k < dimension; ++k) {
            if (k % 64 == 0) bits = engine();
            z[k] = (bits & 1u) ? 1.0 : -1.0;
            bits >>= 1;
        }
    }
    return set;
}

ProbeSet ProbeSet::from_vectors(std::vector<Vector> probes) {
    if (probes.empty()) throw InvalidArgument("trace estimation needs at least one probe vector");
    const std::size_t K = probes.front().size();
    for (const auto& z : probes) {
        if (z.size() != K) throw DimensionError("probe vectors must share one length");
        for (double v : z)
            if (v != 1.0 && v != -1.0) throw InvalidArgument("probe entries must be +1 or -1");
    }
    ProbeSet set;
    set.probes_ = std::move(probes);
    return set;
}

std::uint64_t term_seed(std::uint64_t seed, std::size_t term) noexcept {
    return seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(term);
}

TraceEstimate estimate_trace_correction(const LinearOperator& system, const PenaltyOperator& penalty,
                                        double lambda, const ProbeSet& probes, const CgConfig& cg,
                                        std::span<Vector> warm_starts) {
    const std::size_t K = system.dimension();
    if (probes.size() == 0) throw InvalidArgument("trace estimation needs at least one probe vector");
    if (probes.dimension() != K) throw DimensionError("probe length != system dimension");
    if (penalty.dimension() != K) throw DimensionError("penalty dimension != system dimension");
    if (!warm_starts.empty() && warm_starts.size() != probes.size())
        throw DimensionError("one warm start per probe required");

    TraceEstimate est;
    est.quadratic_forms.reserve(probes.size());
    double sum = 0.0;
    Vector ztilde(K);
    for (std::size_t m = 0; m < probes.size(); ++m) {
        const auto z = probes.probe(m);
        penalty.apply(z, ztilde);
        for (double& v : ztilde) v *= lambda;
        std::span<const double> guess;
        if (!warm_starts.empty() && warm_starts[m].size() == K) guess = warm_starts[m];
        CgResult solve = cg_solve_warm(system, ztilde, cg, guess);
        est.cg_iterations += solve.report.iterations;
        if (!solve.report.converged) {
            std::ostringstream msg;
            msg << "trace estimation: CG did not converge for probe " << m << " after "
                << solve.report.iterations << " iterations (residual "
                << solve.report.final_residual_norm << ")";
            throw TraceEstimationError(msg.str(), m);
        }
        const double q = dot(z, solve.solution);
        est.quadratic_forms.push_back(q);
        sum += q;
        if (!warm_starts.empty()) warm_starts[m] = std::move(solve.solution);
    }
    est.value = static_cast<double>(K) - sum / static_cast<double>(probes.size());
    return est;
}

TraceEstimate estimate_trace_correction(const TensorDesign& design, const PenaltyOperator& penalty,
                                        double lambda, const ProbeSet& probes, const CgConfig& cg,
                                        std::span<const double> w2) {
    const LinearOperator system = make_fit_operator(design, penalty, lambda, w2);
    return estimate_trace_correction(system, penalty, lambda, probes, cg);
}

double penalty_dominance(const TensorDesign& design, const PenaltyOperator& penalty, double lambda,
                         std::span<const double> w2) {
    double gram = 0.0, pen = 0.0;
    for (double v : phi_t_phi_diagonal(design, w2)) gram += v;
    for (double v : penalty.diagonal()) pen += v;
    if (!(gram > 0.0)) return std::numeric_limits<double>::infinity();
    return lambda * pen / gram;
}

bool lambda_converged(double previous, double next, double tol, bool absolute) noexcept {
    const double diff = std::abs(next - previous);
    if (absolute) return diff <= tol;
    return diff <= tol * std::max(1.0, previous);
}

CgResult solve_penalized(const TensorDesign& design, const PenaltyOperator& penalty,
                         std::span<const double> y, double lambda, const CgConfig& cg,
                         std::span<const double> initial_guess) {
    if (y.size() != design.rows()) throw DimensionError("response length != number of rows");
    const LinearOperator system = make_fit_operator(design, penalty, lambda);
    const Vector rhs = apply_phi_t(design, y);
    return cg_solve(system, rhs, cg, initial_guess);
}

namespace {

[[noreturn]] void throw_solve_failure(double lambda, const CgReport& rep) {
    std::ostringstream msg;
    msg << "coefficient solve at lambda = " << lambda << " did not converge after " << rep.iterations
        << " CG iterations (residual " << rep.final_residual_norm << ")";
    throw NonConvergenceError(msg.str());
}

}  // namespace

FitState fixed_point_fit(const TensorDesign& design, const PenaltyOperator& penalty,
                         std::span<const double> y, const FixedPointConfig& config,
                         const TraceFunction& exact_trace) {
    if (!(config.lambda0 > 0.0)) throw InvalidArgument("fixed-point fit: lambda0 must be > 0");
    if (y.size() != design.rows()) throw DimensionError("response length != number of rows");
    if (penalty.dimension() != design.dimension())
        throw DimensionError("penalty dimension != design dimension");
    const std::size_t n = design.rows();
    if (n == 0) throw InputError("fixed-point fit needs at least one observation");
    const std::size_t K = design.dimension();

    const Vector rhs = apply_phi_t(design, y);
    ProbeSet probes;
    std::vector<Vector> warm;
    if (!exact_trace) {
        probes = ProbeSet::rademacher(config.trace.probes, K, config.trace.seed);
        if (config.warm_start) warm.resize(probes.size());
    }

    FitState state;
    double lambda = config.lambda0;
    Vector fitted(n);
    for (std::size_t t = 0; t < config.max_outer; ++t) {
        const LinearOperator system = make_fit_operator(design, penalty, lambda);
        std::span<const double> guess;
        if (config.warm_start && !state.alpha.empty()) guess = state.alpha;
        CgResult solve = cg_solve_warm(system, rhs, config.cg, guess);
        if (!solve.report.converged) throw_solve_failure(lambda, solve.report);
        state.alpha = std::move(solve.solution);

        IterationRecord rec;
        rec.lambda = lambda;
        rec.cg_iterations = solve.report.iterations;

        apply_phi(design, state.alpha, fitted);
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = fitted[i] - y[i];
            rss += e * e;
        }
        rec.sigma2_eps = rss / static_cast<double>(n);

        if (exact_trace) {
            rec.edf = exact_trace(lambda, system);
        } else {
            const TraceEstimate est = estimate_trace_correction(system, penalty, lambda, probes,
                                                                config.cg, warm);
            rec.edf = est.value;
            rec.cg_iterations += est.cg_iterations;
        }
        const double quad = penalty_quadratic_form(penalty, state.alpha);
        state.cg_iterations_total += rec.cg_iterations;
        state.iterations = t + 1;

        if (!(rec.edf > 0.0)) {
            std::ostringstream msg;
            msg << "trace estimate " << rec.edf << " at lambda = " << lambda
                << " is not positive; increase the number of probe vectors";
            throw DegenerateFitError(msg.str());
        }
        rec.sigma2_alpha = quad / rec.edf;
        if (!(rec.sigma2_alpha > 0.0)) {
            std::ostringstream msg;
            msg << "prior variance estimate is " << rec.sigma2_alpha << " at lambda = " << lambda
                << ": coefficients lie in the penalty null space, lambda has no interior optimum";
            throw DegenerateFitError(msg.str());
        }
        rec.next_lambda = rec.sigma2_eps / rec.sigma2_alpha;
        if (!(rec.next_lambda > 0.0) || !std::isfinite(rec.next_lambda)) {
            std::ostringstream msg;
            msg << "smoothing parameter update gave " << rec.next_lambda
                << " (residual variance " << rec.sigma2_eps << "): lambda has no interior optimum";
            throw DegenerateFitError(msg.str());
        }
        if (penalty_dominance(design, penalty, rec.next_lambda) > kMaxPenaltyDominance) {
            std::ostringstream msg;
            msg << "smoothing parameter diverges (update " << lambda << " -> " << rec.next_lambda
                << "): the fit lies in the penalty null space, lambda has no interior optimum";
            throw DegenerateFitError(msg.str());
        }
        state.history.push_back(rec);
        state.sigma2_eps = rec.sigma2_eps;
        state.sigma2_alpha = rec.sigma2_alpha;
        state.edf = rec.edf;

        const bool done = lambda_converged(lambda, rec.next_lambda, config.tol_lambda,
                                           config.absolute_tolerance);
        lambda = rec.next_lambda;
        if (done) {
            state.converged = true;
            break;
        }
    }

    // final coefficients at the accepted lambda
    const LinearOperator system = make_fit_operator(design, penalty, lambda);
    std::span<const double> guess;
    if (config.warm_start && !state.alpha.empty()) guess = state.alpha;
    CgResult solve = cg_solve_warm(system, rhs, config.cg, guess);
    if (!solve.report.converged) throw_solve_failure(lambda, solve.report);
    state.alpha = std::move(solve.solution);
    state.cg_iterations_total += solve.report.iterations;
    state.lambda = lambda;
    return state;
}

}  // namespace tensorsmooth
