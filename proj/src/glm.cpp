#include "tensorsmooth/glm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tensorsmooth/errors.hpp"

namespace tensorsmooth {

namespace {

constexpr double kMaxEta = 700.0;

double safe_exp(double eta) { return std::exp(std::min(eta, kMaxEta)); }

double logistic(double eta) {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double xlogx_ratio(double y, double mu) { return y > 0.0 ? y * std::log(y / mu) : 0.0; }

}  // namespace

Family Family::parse(std::string_view name) {
    if (name == "gaussian_identity" || name == "gaussian") return Family(FamilyKind::gaussian_identity);
    if (name == "gaussian_log") return Family(FamilyKind::gaussian_log);
    if (name == "poisson_log" || name == "poisson") return Family(FamilyKind::poisson_log);
    if (name == "binomial_logit" || name == "binomial") return Family(FamilyKind::binomial_logit);
    throw ConfigError("unknown family '" + std::string(name) +
                      "' (expected gaussian_identity, gaussian_log, poisson_log or binomial_logit)");
}

std::string Family::name() const {
    switch (kind_) {
        case FamilyKind::gaussian_identity: return "gaussian_identity";
        case FamilyKind::gaussian_log: return "gaussian_log";
        case FamilyKind::poisson_log: return "poisson_log";
        case FamilyKind::binomial_logit: return "binomial_logit";
    }
    return "unknown";
}

double Family::mean(double eta) const {
    switch (kind_) {
        case FamilyKind::gaussian_identity: return eta;
        case FamilyKind::gaussian_log:
        case FamilyKind::poisson_log: return safe_exp(eta);
        case FamilyKind::binomial_logit: return logistic(eta);
    }
    return eta;
}

double Family::w1(double eta) const {
    if (kind_ == FamilyKind::gaussian_log) return safe_exp(eta);
    return 1.0;
}

double Family::w2(double eta) const {
    switch (kind_) {
        case FamilyKind::gaussian_identity: return 1.0;
        case FamilyKind::gaussian_log: return 2.0 * safe_exp(eta);
        case FamilyKind::poisson_log: return safe_exp(eta);
        case FamilyKind::binomial_logit: {
            const double mu = logistic(eta);
            return std::max(mu * (1.0 - mu), 1e-300);
        }
    }
    return 1.0;
}

double Family::deviance(std::span<const double> y, std::span<const double> mu) const {
    if (y.size() != mu.size()) throw DimensionError("deviance: length mismatch");
    double d = 0.0;
    switch (kind_) {
        case FamilyKind::gaussian_identity:
        case FamilyKind::gaussian_log:
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double e = y[i] - mu[i];
                d += e * e;
            }
            return d;
        case FamilyKind::poisson_log:
            for (std::size_t i = 0; i < y.size(); ++i)
                d += 2.0 * (xlogx_ratio(y[i], mu[i]) - (y[i] - mu[i]));
            return d;
        case FamilyKind::binomial_logit:
            for (std::size_t i = 0; i < y.size(); ++i)
                d += 2.0 * (xlogx_ratio(y[i], mu[i]) + xlogx_ratio(1.0 - y[i], 1.0 - mu[i]));
            return d;
    }
    return d;
}

void Family::validate_response(std::span<const double> y) const {
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = y[i];
        bool ok = std::isfinite(v);
        if (kind_ == FamilyKind::poisson_log) ok = ok && v >= 0.0;
        if (kind_ == FamilyKind::binomial_logit) ok = ok && v >= 0.0 && v <= 1.0;
        if (!ok) {
            std::ostringstream msg;
            msg << "response value " << v << " in row " << i << " is invalid for family " << name();
            throw InputError(msg.str());
        }
    }
}

double Family::initial_eta(std::span<const double> y) const {
    if (kind_ == FamilyKind::gaussian_identity || y.empty()) return 0.0;
    double s = 0.0;
    if (kind_ == FamilyKind::binomial_logit) {
        for (double v : y) s += v;
        const double p = std::clamp(s / static_cast<double>(y.size()), 1e-6, 1.0 - 1e-6);
        return std::log(p / (1.0 - p));
    }
    for (double v : y) s += std::max(v, 1e-8);
    return std::log(s / static_cast<double>(y.size()));
}

AdditiveDesign::AdditiveDesign(std::vector<AdditiveTerm> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw DimensionError("additive design needs at least one term");
    rows_ = terms_.front().design->rows();
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        const auto& t = terms_[j];
        if (!t.design || !t.penalty) throw InvalidArgument("additive term without design or penalty");
        if (t.design->rows() != rows_) throw DimensionError("additive terms must share the row count");
        if (t.penalty->dimension() != t.design->dimension())
            throw DimensionError("additive term " + std::to_string(j) +
                                 ": penalty dimension != design dimension");
        offsets_.push_back(dimension_);
        dimension_ += t.design->dimension();
    }
}

AdditiveDesign AdditiveDesign::single(const TensorDesign& design, const PenaltyOperator& penalty) {
    AdditiveTerm term;
    term.design = std::shared_ptr<const TensorDesign>(std::shared_ptr<void>(), &design);
    term.penalty = std::shared_ptr<const PenaltyOperator>(std::shared_ptr<void>(), &penalty);
    return AdditiveDesign({term});
}

std::span<const double> AdditiveDesign::slice(std::span<const double> alpha, std::size_t j) const {
    return alpha.subspan(offsets_.at(j), term_dimension(j));
}

std::span<double> AdditiveDesign::slice(std::span<double> alpha, std::size_t j) const {
    return alpha.subspan(offsets_.at(j), term_dimension(j));
}

void AdditiveDesign::apply_phi(std::span<const double> alpha, std::span<double> out) const {
    if (alpha.size() != dimension_) throw DimensionError("additive apply_phi: alpha length != K");
    if (out.size() != rows_) throw DimensionError("additive apply_phi: output length != n");
    tensorsmooth::apply_phi(*terms_[0].design, slice(alpha, 0), out);
    if (terms_.size() == 1) return;
    Vector part(rows_);
    for (std::size_t j = 1; j < terms_.size(); ++j) {
        tensorsmooth::apply_phi(*terms_[j].design, slice(alpha, j), part);
        for (std::size_t i = 0; i < rows_; ++i) out[i] += part[i];
    }
}

Vector AdditiveDesign::apply_phi(std::span<const double> alpha) const {
    Vector out(rows_);
    apply_phi(alpha, out);
    return out;
}

void AdditiveDesign::apply_phi_t(std::span<const double> y, std::span<double> out) const {
    if (y.size() != rows_) throw DimensionError("additive apply_phi_t: y length != n");
    if (out.size() != dimension_) throw DimensionError("additive apply_phi_t: output length != K");
    for (std::size_t j = 0; j < terms_.size(); ++j)
        tensorsmooth::apply_phi_t(*terms_[j].design, y, slice(out, j));
}

Vector AdditiveDesign::apply_phi_t(std::span<const double> y) const {
    Vector out(dimension_);
    apply_phi_t(y, out);
    return out;
}

void AdditiveDesign::check_lambdas(std::span<const double> lambdas) const {
    if (lambdas.size() != terms_.size())
        throw DimensionError("additive design: expected " + std::to_string(terms_.size()) +
                             " smoothing parameters, got " + std::to_string(lambdas.size()));
}

void AdditiveDesign::apply_penalty(std::span<const double> lambdas, std::span<const double> alpha,
                                   std::span<double> out) const {
    check_lambdas(lambdas);
    if (alpha.size() != dimension_ || out.size() != dimension_)
        throw DimensionError("additive penalty: vector length != K");
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        auto o = slice(out, j);
        terms_[j].penalty->apply(slice(alpha, j), o);
        for (double& v : o) v *= lambdas[j];
    }
}

double AdditiveDesign::penalty_quadratic_form(std::span<const double> lambdas,
                                              std::span<const double> alpha) const {
    check_lambdas(lambdas);
    double s = 0.0;
    for (std::size_t j = 0; j < terms_.size(); ++j)
        s += lambdas[j] * tensorsmooth::penalty_quadratic_form(*terms_[j].penalty, slice(alpha, j));
    return s;
}

LinearOperator AdditiveDesign::fit_operator(std::span<const double> lambdas,
                                            std::span<const double> w2) const {
    check_lambdas(lambdas);
    for (double l : lambdas)
        if (!(l >= 0.0)) throw InvalidArgument("additive fit operator: lambda must be >= 0");
    if (!w2.empty() && w2.size() != rows_) throw DimensionError("additive fit operator: weight length != n");
    Vector weights(w2.begin(), w2.end());
    std::vector<double> lam(lambdas.begin(), lambdas.end());

    Vector diag(dimension_);
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        Vector d = phi_t_phi_diagonal(*terms_[j].design, weights);
        if (lam[j] != 0.0) axpy(lam[j], terms_[j].penalty->diagonal(), d);
        std::copy(d.begin(), d.end(), diag.begin() + static_cast<std::ptrdiff_t>(offsets_[j]));
    }

    const AdditiveDesign* self = this;
    auto apply = [self, lam = std::move(lam), weights = std::move(weights)](std::span<const double> a,
                                                                          std::span<double> out) {
        Vector fitted = self->apply_phi(a);
        if (!weights.empty())
            for (std::size_t i = 0; i < fitted.size(); ++i) fitted[i] *= weights[i];
        self->apply_phi_t(fitted, out);
        for (std::size_t j = 0; j < self->terms_.size(); ++j) {
            if (lam[j] == 0.0) continue;
            const Vector pa = self->terms_[j].penalty->apply(self->slice(a, j));
            axpy(lam[j], pa, self->slice(out, j));
        }
    };
    LinearOperator op(dimension_, std::move(apply), std::move(diag));
    if (terms_.size() > 1) {
        // Every term reproduces constants, so a constant moved between terms
        // is a null direction.  Terms after the first get zero-mean blocks.
        op.set_projection([self](std::span<double> a) {
            for (std::size_t j = 1; j < self->terms_.size(); ++j) {
                auto block = self->slice(a, j);
                double mean = 0.0;
                for (double v : block) mean += v;
                mean /= static_cast<double>(block.size());
                for (double& v : block) v -= mean;
            }
        });
    }
    return op;
}

Vector initial_coefficients(const AdditiveDesign& design, const Family& family,
                            std::span<const double> y) {
    Vector alpha(design.dimension(), 0.0);
    const double eta0 = family.initial_eta(y);
    if (eta0 != 0.0) {
        auto first = design.slice(std::span<double>(alpha), 0);
        std::fill(first.begin(), first.end(), eta0);
    }
    return alpha;
}

namespace {

struct Evaluation {
    Vector eta, mu;
    double penalized_deviance = 0.0;
};

Evaluation evaluate(const AdditiveDesign& design, const Family& family, std::span<const double> y,
                    std::span<const double> lambdas, std::span<const double> alpha) {
    Evaluation ev;
    ev.eta = design.apply_phi(alpha);
    ev.mu.resize(ev.eta.size());
    for (std::size_t i = 0; i < ev.eta.size(); ++i) ev.mu[i] = family.mean(ev.eta[i]);
    ev.penalized_deviance = family.deviance(y, ev.mu) + design.penalty_quadratic_form(lambdas, alpha);
    return ev;
}

}  // namespace

double penalized_deviance(const AdditiveDesign& design, const Family& family,
                          std::span<const double> y, std::span<const double> lambdas,
                          std::span<const double> alpha) {
    return evaluate(design, family, y, lambdas, alpha).penalized_deviance;
}

FisherResult fisher_scoring_fit(const AdditiveDesign& design, const Family& family,
                                std::span<const double> y, std::span<const double> lambdas,
                                const FisherConfig& config, std::span<const double> initial_alpha) {
    const std::size_t n = design.rows();
    const std::size_t K = design.dimension();
    if (y.size() != n) throw DimensionError("response length != number of rows");
    if (lambdas.size() != design.term_count())
        throw DimensionError("one smoothing parameter per additive term required");
    for (double l : lambdas)
        if (!(l > 0.0)) throw InvalidArgument("Fisher scoring: smoothing parameters must be > 0");
    if (!initial_alpha.empty() && initial_alpha.size() != K)
        throw DimensionError("initial coefficient length != K");
    family.validate_response(y);

    FisherResult res;
    res.alpha = initial_alpha.empty() ? initial_coefficients(design, family, y)
                                      : Vector(initial_alpha.begin(), initial_alpha.end());
    res.score_scale = std::max(1.0, norm2(design.apply_phi_t(y)));

    Evaluation cur = evaluate(design, family, y, lambdas, res.alpha);
    res.penalized_deviance.push_back(cur.penalized_deviance);

    Vector resid(n), w2(n), score(K), pen(K);
    for (;;) {
        for (std::size_t i = 0; i < n; ++i) {
            resid[i] = family.w1(cur.eta[i]) * (y[i] - cur.mu[i]);
            w2[i] = family.w2(cur.eta[i]);
        }
        design.apply_phi_t(resid, score);
        design.apply_penalty(lambdas, res.alpha, pen);
        for (std::size_t k = 0; k < K; ++k) score[k] -= pen[k];
        res.score_norm = norm2(score);
        if (res.score_norm <= config.tol * res.score_scale) {
            res.converged = true;
            break;
        }
        if (res.iterations >= config.max_iter) break;

        const LinearOperator info = design.fit_operator(
            lambdas, family.is_gaussian_identity() ? std::span<const double>{} : std::span<const double>(w2));
        const CgResult step = cg_solve(info, score, config.cg);
        res.cg_iterations += step.report.iterations;
        ++res.iterations;

        double factor = 1.0;
        bool accepted = false;
        Vector trial(K);
        Evaluation next;
        for (std::size_t h = 0; h <= config.max_halvings; ++h) {
            for (std::size_t k = 0; k < K; ++k) trial[k] = res.alpha[k] + factor * step.solution[k];
            next = evaluate(design, family, y, lambdas, trial);
            if (next.penalized_deviance <= cur.penalized_deviance) {
                accepted = true;
                break;
            }
            factor *= 0.5;
            ++res.halvings;
        }
        if (!accepted) {
            // objective flat to rounding: no representable descent remains
            const double slack = 1e-10 * std::max(1.0, std::abs(cur.penalized_deviance));
            if (next.penalized_deviance - cur.penalized_deviance <= slack) {
                res.converged = true;
                break;
            }
            std::ostringstream msg;
            msg << "Fisher scoring: step halving exhausted after " << config.max_halvings
                << " halvings at iteration " << res.iterations << " (penalized deviance "
                << cur.penalized_deviance << ", score norm " << res.score_norm << ")";
            throw NonConvergenceError(msg.str());
        }
        res.alpha = std::move(trial);
        cur = std::move(next);
        res.penalized_deviance.push_back(cur.penalized_deviance);
    }
    res.eta = std::move(cur.eta);
    res.mu = std::move(cur.mu);
    return res;
}

FisherResult fisher_scoring_fit(const TensorDesign& design, const PenaltyOperator& penalty,
                                const Family& family, std::span<const double> y, double lambda,
                                const FisherConfig& config, std::span<const double> initial_alpha) {
    const AdditiveDesign additive = AdditiveDesign::single(design, penalty);
    const double lambdas[] = {lambda};
    return fisher_scoring_fit(additive, family, y, lambdas, config, initial_alpha);
}

VarianceUpdate additive_variance_update(const AdditiveDesign& design, const Family& family,
                                        std::span<const double> y, std::span<const double> alpha,
                                        std::span<const double> lambdas,
                                        std::span<const ProbeSet> probes, const CgConfig& cg,
                                        std::span<std::vector<Vector>> warm_starts) {
    const std::size_t n = design.rows();
    const std::size_t I = design.term_count();
    if (y.size() != n) throw DimensionError("response length != number of rows");
    if (alpha.size() != design.dimension()) throw DimensionError("coefficient length != K");
    if (lambdas.size() != I || probes.size() != I)
        throw DimensionError("one smoothing parameter and probe set per term required");
    if (!warm_starts.empty() && warm_starts.size() != I)
        throw DimensionError("one warm-start set per term required");

    VarianceUpdate up;
    const Vector eta = design.apply_phi(alpha);
    double rss = 0.0;
    Vector w2;
    if (!family.is_gaussian_identity()) w2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = family.mean(eta[i]) - y[i];
        rss += e * e;
        if (!w2.empty()) w2[i] = family.w2(eta[i]);
    }
    up.sigma2_eps = n > 0 ? rss / static_cast<double>(n) : 0.0;

    up.sigma2_terms.assign(I, 0.0);
    up.edf.assign(I, 0.0);
    up.quadratic_forms.assign(I, 0.0);
    up.degenerate.assign(I, false);
    for (std::size_t j = 0; j < I; ++j) {
        if (probes[j].size() == 0) continue;
        const auto& term = design.term(j);
        const auto aj = design.slice(alpha, j);
        const LinearOperator system = make_fit_operator(*term.design, *term.penalty, lambdas[j], w2);
        std::span<Vector> warm;
        if (!warm_starts.empty()) {
            warm_starts[j].resize(probes[j].size());
            warm = warm_starts[j];
        }
        const TraceEstimate est =
            estimate_trace_correction(system, *term.penalty, lambdas[j], probes[j], cg, warm);
        up.cg_iterations += est.cg_iterations;
        up.edf[j] = est.value;
        up.quadratic_forms[j] = tensorsmooth::penalty_quadratic_form(*term.penalty, aj);
        if (!(up.edf[j] > 0.0) || !(up.quadratic_forms[j] > 0.0)) {
            up.degenerate[j] = true;
            continue;
        }
        up.sigma2_terms[j] = up.quadratic_forms[j] / up.edf[j];
    }
    return up;
}

VarianceUpdate glm_variance_update(const TensorDesign& design, const PenaltyOperator& penalty,
                                   const Family& family, std::span<const double> y,
                                   std::span<const double> alpha, double lambda,
                                   const ProbeSet& probes, const CgConfig& cg) {
    const AdditiveDesign additive = AdditiveDesign::single(design, penalty);
    const double lambdas[] = {lambda};
    VarianceUpdate up = additive_variance_update(additive, family, y, alpha, lambdas,
                                                 std::span<const ProbeSet>(&probes, 1), cg);
    if (up.degenerate[0]) {
        std::ostringstream msg;
        msg << "prior variance estimate not positive (alpha^T Lambda alpha = " << up.quadratic_forms[0]
            << ", trace = " << up.edf[0] << "): lambda has no interior optimum";
        throw DegenerateFitError(msg.str());
    }
    return up;
}

namespace {

struct InnerFit {
    Vector alpha;
    Vector mu;
    std::size_t cg_iterations = 0;
    std::size_t fisher_iterations = 0;
};

InnerFit inner_fit(const AdditiveDesign& design, const Family& family, std::span<const double> y,
                   std::span<const double> rhs, std::span<const double> lambdas,
                   const FisherConfig& config, std::span<const double> start) {
    InnerFit fit;
    if (family.is_gaussian_identity()) {
        const LinearOperator system = design.fit_operator(lambdas);
        CgResult solve = cg_solve_warm(system, rhs, config.cg, start);
        if (!solve.report.converged) {
            std::ostringstream msg;
            msg << "coefficient solve did not converge after " << solve.report.iterations
                << " CG iterations (residual " << solve.report.final_residual_norm << ") at lambda =";
            for (double l : lambdas) msg << ' ' << l;
            throw NonConvergenceError(msg.str());
        }
        fit.alpha = std::move(solve.solution);
        fit.mu = design.apply_phi(fit.alpha);
        fit.cg_iterations = solve.report.iterations;
        return fit;
    }
    FisherResult fr = fisher_scoring_fit(design, family, y, lambdas, config, start);
    if (!fr.converged) {
        std::ostringstream msg;
        msg << "Fisher scoring did not converge in " << fr.iterations << " iterations (score norm "
            << fr.score_norm << ")";
        throw NonConvergenceError(msg.str());
    }
    fit.alpha = std::move(fr.alpha);
    fit.mu = std::move(fr.mu);
    fit.cg_iterations = fr.cg_iterations;
    fit.fisher_iterations = fr.iterations;
    return fit;
}

}  // namespace

AdditiveFitState additive_outer_fit(const AdditiveDesign& design, const Family& family,
                                    std::span<const double> y, const AdditiveFitConfig& config) {
    const std::size_t I = design.term_count();
    if (y.size() != design.rows()) throw DimensionError("response length != number of rows");
    if (design.rows() == 0) throw InputError("fit needs at least one observation");
    family.validate_response(y);

    std::vector<double> lambdas;
    if (config.lambda0.size() == 1) lambdas.assign(I, config.lambda0.front());
    else if (config.lambda0.size() == I) lambdas = config.lambda0;
    else throw DimensionError("lambda0 needs one entry or one per term");
    for (double l : lambdas)
        if (!(l > 0.0)) throw InvalidArgument("initial smoothing parameters must be > 0");
    std::vector<bool> fixed = config.fixed;
    if (fixed.empty()) fixed.assign(I, false);
    if (fixed.size() != I) throw DimensionError("fixed flags need one entry per term");

    const Vector rhs = design.apply_phi_t(y);
    if (!config.probes.empty() && config.probes.size() != I)
        throw DimensionError("explicit probes need one set per term");
    std::vector<ProbeSet> probes(I);
    for (std::size_t j = 0; j < I; ++j)
        if (!fixed[j] && !config.probes.empty()) {
            if (config.probes[j].dimension() != design.term_dimension(j))
                throw DimensionError("probe length != term dimension");
            probes[j] = config.probes[j];
        } else if (!fixed[j])
            probes[j] = ProbeSet::rademacher(config.trace.probes, design.term_dimension(j),
                                             term_seed(config.trace.seed, j));
    std::vector<std::vector<Vector>> warm(config.warm_start ? I : 0);

    AdditiveFitState state;
    state.degenerate.assign(I, false);
    state.sigma2_terms.assign(I, 0.0);
    state.edf.assign(I, 0.0);
    const bool all_fixed = std::all_of(fixed.begin(), fixed.end(), [](bool f) { return f; });

    Vector alpha = family.is_gaussian_identity() ? Vector{} : initial_coefficients(design, family, y);
    auto run_inner = [&](std::size_t& cg_count, std::size_t& fisher_count) {
        std::span<const double> start;
        if (!alpha.empty() && (config.warm_start || !family.is_gaussian_identity())) start = alpha;
        InnerFit fit = inner_fit(design, family, y, rhs, lambdas, config.fisher, start);
        alpha = std::move(fit.alpha);
        state.mu = std::move(fit.mu);
        cg_count += fit.cg_iterations;
        fisher_count += fit.fisher_iterations;
    };

    if (all_fixed) {
        run_inner(state.cg_iterations_total, state.fisher_iterations_total);
        state.converged = true;
    } else {
        for (std::size_t t = 0; t < config.max_outer; ++t) {
            AdditiveIterationRecord rec;
            rec.lambdas = lambdas;
            run_inner(rec.cg_iterations, rec.fisher_iterations);

            const VarianceUpdate up = additive_variance_update(design, family, y, alpha, lambdas,
                                                               probes, config.fisher.cg, warm);
            rec.cg_iterations += up.cg_iterations;
            rec.sigma2_eps = up.sigma2_eps;
            rec.sigma2_terms = up.sigma2_terms;
            rec.edf = up.edf;
            rec.next_lambdas = lambdas;
            state.iterations = t + 1;
            state.sigma2_eps = up.sigma2_eps;

            Vector w2;
            if (!family.is_gaussian_identity()) {
                w2 = design.apply_phi(alpha);
                for (double& v : w2) v = family.w2(v);
            }
            bool all_converged = true;
            bool any_estimated = false;
            for (std::size_t j = 0; j < I; ++j) {
                if (fixed[j]) continue;
                state.edf[j] = up.edf[j];
                state.sigma2_terms[j] = up.sigma2_terms[j];
                bool degenerate = up.degenerate[j];
                double next = lambdas[j];
                if (!degenerate) {
                    next = up.sigma2_eps / up.sigma2_terms[j];
                    if (!(next > 0.0) || !std::isfinite(next)) degenerate = true;
                    else if (penalty_dominance(*design.term(j).design, *design.term(j).penalty, next, w2) >
                             kMaxPenaltyDominance)
                        degenerate = true;
                }
                state.degenerate[j] = degenerate;
                if (degenerate) continue;
                any_estimated = true;
                rec.next_lambdas[j] = next;
                if (!lambda_converged(lambdas[j], next, config.tol_lambda, config.absolute_tolerance))
                    all_converged = false;
            }
            state.cg_iterations_total += rec.cg_iterations;
            state.fisher_iterations_total += rec.fisher_iterations;
            lambdas = rec.next_lambdas;
            state.history.push_back(std::move(rec));

            if (!any_estimated) {
                state.degenerate_stop = true;
                break;
            }
            if (all_converged) {
                state.converged = true;
                break;
            }
        }
        if (!state.degenerate_stop)
            run_inner(state.cg_iterations_total, state.fisher_iterations_total);
    }
    state.alpha = std::move(alpha);
    state.lambdas = std::move(lambdas);
    return state;
}

}  // namespace tensorsmooth
