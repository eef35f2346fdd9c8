#include "tensorsmooth/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tensorsmooth/alloc_accounting.hpp"
#include "tensorsmooth/errors.hpp"
#include "tensorsmooth/tensor_ops.hpp"

namespace tensorsmooth {

using nlohmann::json;

void ModelSpec::validate() const {
    if (response.empty()) throw ConfigError("response column name is empty");
    if (terms.empty()) throw ConfigError("model needs at least one term");
    for (std::size_t j = 0; j < terms.size(); ++j) {
        const auto& t = terms[j];
        const std::string where = "term " + std::to_string(j) + ": ";
        if (t.dimensions.empty()) throw ConfigError(where + "no covariates");
        std::set<std::string> seen;
        for (const auto& d : t.dimensions) {
            if (d.column.empty()) throw ConfigError(where + "empty covariate name");
            if (d.column == response) throw ConfigError(where + "covariate '" + d.column + "' is the response");
            if (!seen.insert(d.column).second)
                throw ConfigError(where + "covariate '" + d.column + "' appears twice");
            if (d.degree < 0) throw ConfigError(where + "degree must be >= 0");
            if (d.n_interior_knots < 0) throw ConfigError(where + "number of interior knots must be >= 0");
            if (d.difference_order < 1) throw ConfigError(where + "difference order must be >= 1");
            if (d.domain && !(d.domain->first < d.domain->second))
                throw ConfigError(where + "domain of '" + d.column + "' needs lower < upper");
        }
        if (t.fixed_lambda && !(*t.fixed_lambda > 0.0))
            throw ConfigError(where + "fixed lambda must be > 0");
    }
    if (trace.probes < 1) throw ConfigError("number of probe vectors must be >= 1");
    if (!(cg.tol > 0.0)) throw ConfigError("CG tolerance must be > 0");
    if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw ConfigError("lambda0 must be > 0");
    if (!(tol_lambda > 0.0)) throw ConfigError("lambda tolerance must be > 0");
    if (max_outer < 1) throw ConfigError("max_outer must be >= 1");
    if (!(fisher_tol > 0.0)) throw ConfigError("Fisher tolerance must be > 0");
}

namespace {

[[noreturn]] void rethrow_with_context(const std::string& ctx) {
    try {
        throw;
    } catch (const DomainError& e) {
        throw DomainError(ctx + e.what(), e.rows());
    } catch (const DuplicateKnotError& e) {
        throw DuplicateKnotError(ctx + e.what());
    } catch (const OrderTooHighError& e) {
        throw OrderTooHighError(ctx + e.what());
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(ctx + e.what());
    } catch (const TraceEstimationError& e) {
        throw TraceEstimationError(ctx + e.what(), e.probe_index());
    } catch (const DegenerateFitError& e) {
        throw DegenerateFitError(ctx + e.what());
    } catch (const NonConvergenceError& e) {
        throw NonConvergenceError(ctx + e.what());
    } catch (const PreconditionerError& e) {
        throw PreconditionerError(ctx + e.what());
    } catch (const InputError& e) {
        throw InputError(ctx + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(ctx + e.what());
    } catch (const DimensionError& e) {
        throw DimensionError(ctx + e.what());
    }
}

template <class F>
auto with_context(const std::string& ctx, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error&) {
        rethrow_with_context(ctx);
    }
}

std::string row_list(const std::vector<std::size_t>& rows) {
    std::ostringstream s;
    const std::size_t shown = std::min<std::size_t>(rows.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) s << (i ? ", " : "") << rows[i];
    if (rows.size() > shown) s << ", ... (" << rows.size() << " rows)";
    return s.str();
}

std::pair<double, double> training_domain(std::span<const double> x) {
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    const double width = *hi - *lo;
    const double margin = width > 0.0 ? 1e-6 * width : 1e-6 * std::max(1.0, std::abs(*lo));
    return {*lo - margin, *hi + margin};
}

void check_domain(const UnivariateBasis& basis, std::span<const double> x, std::vector<std::size_t>& bad) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!basis.contains(x[i])) bad.push_back(i);
}

std::string term_context(std::size_t j) { return "term " + std::to_string(j) + ": "; }

}  // namespace

TermDesign build_term_design(const TermSpec& spec, const Table& data) {
    TermDesign bt;
    std::vector<BasisMatrix> factors;
    for (const auto& d : spec.dimensions) {
        const auto x = data.column(d.column);
        const auto dom = d.domain ? *d.domain : training_domain(x);
        std::vector<std::size_t> bad;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (!(x[i] >= dom.first && x[i] <= dom.second)) bad.push_back(i);
        if (!bad.empty())
            throw DomainError("covariate '" + d.column + "' outside its basis domain in rows " + row_list(bad),
                              bad);
        bt.bases.push_back(build_basis(dom.first, dom.second, d.n_interior_knots, d.degree, d.placement, x));
        factors.push_back(BasisMatrix::from_basis(bt.bases.back(), x));
    }
    bt.design = std::make_shared<TensorDesign>(std::move(factors));
    if (spec.penalty == PenaltyKind::curvature) {
        bt.penalty = std::make_shared<PenaltyOperator>(build_curvature_penalty(bt.bases));
    } else {
        std::vector<int> orders;
        for (const auto& d : spec.dimensions) orders.push_back(d.difference_order);
        bt.penalty = std::make_shared<PenaltyOperator>(build_difference_penalty(bt.bases, orders));
    }
    return bt;
}

FittedModel fit(const ModelSpec& spec, const Table& data) {
    spec.validate();
    const auto t0 = std::chrono::steady_clock::now();
    alloc::Scope scope;

    const std::size_t n = data.rows();
    if (n == 0) throw InputError("data has no rows");
    const auto y = data.column(spec.response);
    spec.family.validate_response(y);

    const std::size_t I = spec.terms.size();
    std::vector<TermDesign> built;
    for (std::size_t j = 0; j < I; ++j)
        built.push_back(with_context(term_context(j) + "basis setup: ", [&] { return build_term_design(spec.terms[j], data); }));

    FittedModel model;
    model.spec = spec;
    model.terms.resize(I);
    for (std::size_t j = 0; j < I; ++j) {
        model.terms[j].bases = built[j].bases;
        model.terms[j].lambda_fixed = spec.terms[j].fixed_lambda.has_value();
    }
    auto& diag = model.diagnostics;
    diag.probe_seed = spec.trace.seed;
    diag.probes = spec.trace.probes;

    const bool all_fixed = std::all_of(spec.terms.begin(), spec.terms.end(),
                                       [](const TermSpec& t) { return t.fixed_lambda.has_value(); });

    if (I == 1 && spec.family.is_gaussian_identity() && !all_fixed) {
        diag.path = "fixed_point";
        FixedPointConfig cfg;
        cfg.lambda0 = spec.lambda0;
        cfg.tol_lambda = spec.tol_lambda;
        cfg.absolute_tolerance = spec.absolute_tolerance;
        cfg.max_outer = spec.max_outer;
        cfg.cg = spec.cg;
        cfg.trace = spec.trace;
        cfg.warm_start = spec.warm_start;
        FitState st = with_context("smoothing parameter estimation: ", [&] {
            return fixed_point_fit(*built[0].design, *built[0].penalty, y, cfg);
        });
        auto& tf = model.terms[0];
        tf.lambda = st.lambda;
        tf.sigma2_alpha = st.sigma2_alpha;
        tf.edf = st.edf;
        diag.fitted = apply_phi(*built[0].design, st.alpha);
        tf.coefficients = std::move(st.alpha);
        model.sigma2_eps = st.sigma2_eps;
        diag.converged = st.converged;
        diag.outer_iterations = st.iterations;
        diag.cg_iterations = st.cg_iterations_total;
    } else {
        std::vector<AdditiveTerm> terms;
        for (auto& b : built) terms.push_back({b.design, b.penalty});
        const AdditiveDesign design(std::move(terms));
        AdditiveFitConfig cfg;
        cfg.lambda0.clear();
        for (const auto& t : spec.terms) {
            cfg.lambda0.push_back(t.fixed_lambda.value_or(spec.lambda0));
            cfg.fixed.push_back(t.fixed_lambda.has_value());
        }
        cfg.tol_lambda = spec.tol_lambda;
        cfg.absolute_tolerance = spec.absolute_tolerance;
        cfg.max_outer = spec.max_outer;
        cfg.fisher.tol = spec.fisher_tol;
        cfg.fisher.max_iter = spec.fisher_max_iter;
        cfg.fisher.max_halvings = spec.fisher_max_halvings;
        cfg.fisher.cg = spec.cg;
        cfg.trace = spec.trace;
        cfg.warm_start = spec.warm_start;
        diag.path = all_fixed ? "fixed_lambda" : (I == 1 ? "glm_fixed_point" : "additive");
        if (all_fixed) diag.probes = 0;

        AdditiveFitState st = with_context(all_fixed ? "fixed-lambda fit: " : "smoothing parameter estimation: ",
                                           [&] { return additive_outer_fit(design, spec.family, y, cfg); });
        if (I == 1 && st.degenerate_stop)
            throw DegenerateFitError("smoothing parameter estimation: prior variance estimate not positive at lambda = " +
                                     format_double(st.lambdas[0]) + ": lambda has no interior optimum");
        for (std::size_t j = 0; j < I; ++j) {
            auto& tf = model.terms[j];
            const auto a = design.slice(std::span<const double>(st.alpha), j);
            tf.coefficients.assign(a.begin(), a.end());
            tf.lambda = st.lambdas[j];
            tf.sigma2_alpha = st.sigma2_terms[j];
            tf.edf = st.edf[j];
            tf.degenerate = st.degenerate[j];
        }
        model.sigma2_eps = st.sigma2_eps;
        if (all_fixed) {
            double rss = 0.0;
            for (std::size_t i = 0; i < n; ++i) rss += (st.mu[i] - y[i]) * (st.mu[i] - y[i]);
            model.sigma2_eps = rss / static_cast<double>(n);
        }
        diag.fitted = std::move(st.mu);
        diag.converged = st.converged;
        diag.outer_iterations = st.iterations;
        diag.cg_iterations = st.cg_iterations_total;
        diag.fisher_iterations = st.fisher_iterations_total;
    }

    diag.peak_bytes = scope.peak_growth();
    diag.largest_allocation = scope.largest_allocation();
    diag.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return model;
}

Vector predict_linear(const FittedModel& model, const Table& data) {
    const std::size_t n = data.rows();
    const auto& spec = model.spec;
    if (model.terms.size() != spec.terms.size()) throw SchemaError("model terms do not match its spec");

    std::vector<std::size_t> bad;
    std::string bad_columns;
    for (std::size_t j = 0; j < spec.terms.size(); ++j)
        for (std::size_t p = 0; p < spec.terms[j].dimensions.size(); ++p) {
            const auto& col = spec.terms[j].dimensions[p].column;
            const std::size_t before = bad.size();
            check_domain(model.terms[j].bases[p], data.column(col), bad);
            if (bad.size() != before) bad_columns += (bad_columns.empty() ? "" : ", ") + col;
        }
    if (!bad.empty()) {
        std::sort(bad.begin(), bad.end());
        bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
        throw DomainError("covariates outside the training domain (" + bad_columns + ") in rows " + row_list(bad),
                          bad);
    }

    Vector eta(n, 0.0);
    Vector part(n);
    for (std::size_t j = 0; j < spec.terms.size(); ++j) {
        std::vector<BasisMatrix> factors;
        for (std::size_t p = 0; p < spec.terms[j].dimensions.size(); ++p)
            factors.push_back(BasisMatrix::from_basis(model.terms[j].bases[p],
                                                      data.column(spec.terms[j].dimensions[p].column)));
        const TensorDesign design(std::move(factors));
        if (design.dimension() != model.terms[j].coefficients.size())
            throw SchemaError("term " + std::to_string(j) + ": coefficient count does not match the bases");
        if (j == 0) {
            apply_phi(design, model.terms[j].coefficients, eta);
        } else {
            apply_phi(design, model.terms[j].coefficients, part);
            for (std::size_t i = 0; i < n; ++i) eta[i] += part[i];
        }
    }
    return eta;
}

Vector predict(const FittedModel& model, const Table& data) {
    Vector eta = predict_linear(model, data);
    for (double& v : eta) v = model.spec.family.mean(v);
    return eta;
}

// ---- simulation -----------------------------------------------------------

namespace {

struct Scenario {
    std::string name;
    std::size_t dims;
    double (*truth)(std::span<const double>);
};

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double smooth2(std::span<const double> x) { return std::sin(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]); }

const std::vector<Scenario>& scenarios() {
    static const std::vector<Scenario> list = {
        {"smooth_2d", 2, [](std::span<const double> x) { return smooth2(x); }},
        {"smooth_3d", 3, [](std::span<const double> x) { return smooth2(x) * std::sin(std::numbers::pi * x[2]); }},
        {"smooth_4d", 4, [](std::span<const double> x) { return smooth2(x) + (x[2] - 0.5) * (x[3] - 0.5); }},
        {"additive_2plus2", 4,
         [](std::span<const double> x) { return smooth2(x) + std::cos(std::numbers::pi * x[2]) * x[3]; }},
        {"loglink_2d", 2, [](std::span<const double> x) { return std::exp(0.5 + 0.5 * smooth2(x)); }},
    };
    return list;
}

double uniform01(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

}  // namespace

std::vector<std::string> simulation_scenarios() {
    std::vector<std::string> names;
    for (const auto& s : scenarios()) names.push_back(s.name);
    return names;
}

Simulation simulate(const std::string& scenario, std::size_t n, double noise_sd, std::uint64_t seed) {
    const Scenario* sc = nullptr;
    for (const auto& s : scenarios())
        if (s.name == scenario) sc = &s;
    if (!sc) {
        std::string known;
        for (const auto& s : simulation_scenarios()) known += (known.empty() ? "" : ", ") + s;
        throw ConfigError("unknown scenario '" + scenario + "' (known: " + known + ")");
    }
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ConfigError("noise standard deviation must be >= 0");

    std::mt19937_64 g(seed);
    std::vector<Vector> x(sc->dims, Vector(n));
    Vector y(n), truth(n);
    std::vector<double> row(sc->dims);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < sc->dims; ++p) row[p] = x[p][i] = uniform01(g);
        const double u1 = 1.0 - uniform01(g);
        const double u2 = uniform01(g);
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
        truth[i] = sc->truth(row);
        y[i] = noise_sd == 0.0 ? truth[i] : truth[i] + noise_sd * z;
    }
    Simulation sim;
    for (std::size_t p = 0; p < sc->dims; ++p) sim.data.set("x" + std::to_string(p + 1), std::move(x[p]));
    sim.data.set("y", std::move(y));
    sim.data.set("truth", std::move(truth));
    const auto fn = sc->truth;
    const std::size_t dims = sc->dims;
    sim.truth = [fn, dims](std::span<const double> v) {
        if (v.size() != dims) throw DimensionError("truth function expects " + std::to_string(dims) + " covariates");
        return fn(v);
    };
    return sim;
}

// ---- JSON ---------------------------------------------------------------

namespace {

const char* placement_name(KnotPlacement p) { return p == KnotPlacement::quantile ? "quantile" : "equidistant"; }

KnotPlacement parse_placement(const std::string& s) {
    if (s == "equidistant") return KnotPlacement::equidistant;
    if (s == "quantile") return KnotPlacement::quantile;
    throw ConfigError("unknown knot placement '" + s + "' (expected equidistant or quantile)");
}

PenaltyKind parse_penalty(const std::string& s) {
    if (s == "difference" || s == "diff") return PenaltyKind::difference;
    if (s == "curvature" || s == "curv") return PenaltyKind::curvature;
    throw ConfigError("unknown penalty '" + s + "' (expected diff or curv)");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

json dimension_to_json(const DimensionSpec& d) {
    json o{{"column", d.column},
           {"knots", d.n_interior_knots},
           {"degree", d.degree},
           {"placement", placement_name(d.placement)},
           {"difference_order", d.difference_order}};
    if (d.domain) o["domain"] = {d.domain->first, d.domain->second};
    return o;
}

DimensionSpec dimension_from_json(const json& j, const DimensionSpec& defaults, const std::string& where) {
    check_keys(j, {"column", "knots", "degree", "placement", "difference_order", "domain"}, where);
    DimensionSpec d = defaults;
    d.column = j.at("column").get<std::string>();
    d.n_interior_knots = get_or(j, "knots", d.n_interior_knots);
    d.degree = get_or(j, "degree", d.degree);
    if (j.contains("placement")) d.placement = parse_placement(j.at("placement").get<std::string>());
    d.difference_order = get_or(j, "difference_order", d.difference_order);
    if (j.contains("domain")) {
        const auto& dom = j.at("domain");
        if (!dom.is_array() || dom.size() != 2) throw ConfigError(where + ": domain must be [lower, upper]");
        d.domain = std::pair{dom[0].get<double>(), dom[1].get<double>()};
    }
    return d;
}

const char* criterion_name(CgCriterion c) { return c == CgCriterion::relative ? "relative" : "absolute_squared"; }

json spec_json(const ModelSpec& s) {
    json terms = json::array();
    for (const auto& t : s.terms) {
        json dims = json::array();
        for (const auto& d : t.dimensions) dims.push_back(dimension_to_json(d));
        json o{{"dimensions", dims}, {"penalty", t.penalty == PenaltyKind::curvature ? "curvature" : "difference"}};
        if (t.fixed_lambda) o["lambda"] = *t.fixed_lambda;
        terms.push_back(o);
    }
    return json{{"response", s.response},
                {"family", s.family.name()},
                {"terms", terms},
                {"trace", {{"probes", s.trace.probes}, {"seed", s.trace.seed}}},
                {"cg",
                 {{"tol", s.cg.tol},
                  {"criterion", criterion_name(s.cg.criterion)},
                  {"max_iter", s.cg.max_iter},
                  {"preconditioner", s.cg.preconditioner == Preconditioner::jacobi ? "jacobi" : "none"}}},
                {"lambda0", s.lambda0},
                {"tol_lambda", s.tol_lambda},
                {"absolute_tolerance", s.absolute_tolerance},
                {"max_outer", s.max_outer},
                {"fisher", {{"tol", s.fisher_tol}, {"max_iter", s.fisher_max_iter}, {"max_halvings", s.fisher_max_halvings}}},
                {"warm_start", s.warm_start}};
}

ModelSpec spec_from(const json& j) {
    check_keys(j, {"response", "family", "terms", "trace", "cg", "lambda0", "tol_lambda", "absolute_tolerance",
                   "max_outer", "fisher", "warm_start"},
               "config");
    ModelSpec s;
    s.response = get_or<std::string>(j, "response", s.response);
    if (j.contains("family")) s.family = Family::parse(j.at("family").get<std::string>());
    if (j.contains("terms")) {
        const auto& terms = j.at("terms");
        if (!terms.is_array()) throw ConfigError("config: terms must be an array");
        for (std::size_t k = 0; k < terms.size(); ++k) {
            const auto& t = terms[k];
            const std::string where = "config term " + std::to_string(k);
            check_keys(t, {"dimensions", "covariates", "knots", "degree", "placement", "difference_order", "domain",
                           "penalty", "lambda"},
                       where);
            TermSpec ts;
            DimensionSpec defaults;
            defaults.n_interior_knots = get_or(t, "knots", defaults.n_interior_knots);
            defaults.degree = get_or(t, "degree", defaults.degree);
            if (t.contains("placement")) defaults.placement = parse_placement(t.at("placement").get<std::string>());
            defaults.difference_order = get_or(t, "difference_order", defaults.difference_order);
            if (t.contains("domain")) {
                const auto& dom = t.at("domain");
                if (!dom.is_array() || dom.size() != 2) throw ConfigError(where + ": domain must be [lower, upper]");
                defaults.domain = std::pair{dom[0].get<double>(), dom[1].get<double>()};
            }
            if (t.contains("dimensions") == t.contains("covariates"))
                throw ConfigError(where + ": give exactly one of 'dimensions' or 'covariates'");
            if (t.contains("dimensions")) {
                for (const auto& d : t.at("dimensions")) ts.dimensions.push_back(dimension_from_json(d, defaults, where));
            } else {
                for (const auto& c : t.at("covariates")) {
                    DimensionSpec d = defaults;
                    d.column = c.get<std::string>();
                    ts.dimensions.push_back(d);
                }
            }
            if (t.contains("penalty")) ts.penalty = parse_penalty(t.at("penalty").get<std::string>());
            if (t.contains("lambda")) ts.fixed_lambda = t.at("lambda").get<double>();
            s.terms.push_back(std::move(ts));
        }
    }
    if (j.contains("trace")) {
        const auto& t = j.at("trace");
        check_keys(t, {"probes", "seed"}, "config trace");
        s.trace.probes = get_or(t, "probes", s.trace.probes);
        s.trace.seed = get_or(t, "seed", s.trace.seed);
    }
    if (j.contains("cg")) {
        const auto& c = j.at("cg");
        check_keys(c, {"tol", "criterion", "max_iter", "preconditioner"}, "config cg");
        s.cg.tol = get_or(c, "tol", s.cg.tol);
        if (c.contains("criterion")) {
            const auto name = c.at("criterion").get<std::string>();
            if (name == "relative") s.cg.criterion = CgCriterion::relative;
            else if (name == "absolute_squared") s.cg.criterion = CgCriterion::absolute_squared;
            else throw ConfigError("unknown CG criterion '" + name + "'");
        }
        s.cg.max_iter = get_or(c, "max_iter", s.cg.max_iter);
        if (c.contains("preconditioner")) {
            try {
                s.cg.preconditioner = parse_preconditioner(c.at("preconditioner").get<std::string>());
            } catch (const InvalidArgument& e) {
                throw ConfigError(e.what());
            }
        }
    }
    s.lambda0 = get_or(j, "lambda0", s.lambda0);
    s.tol_lambda = get_or(j, "tol_lambda", s.tol_lambda);
    s.absolute_tolerance = get_or(j, "absolute_tolerance", s.absolute_tolerance);
    s.max_outer = get_or(j, "max_outer", s.max_outer);
    if (j.contains("fisher")) {
        const auto& f = j.at("fisher");
        check_keys(f, {"tol", "max_iter", "max_halvings"}, "config fisher");
        s.fisher_tol = get_or(f, "tol", s.fisher_tol);
        s.fisher_max_iter = get_or(f, "max_iter", s.fisher_max_iter);
        s.fisher_max_halvings = get_or(f, "max_halvings", s.fisher_max_halvings);
    }
    s.warm_start = get_or(j, "warm_start", s.warm_start);
    return s;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (!j.is_number()) throw SchemaError("expected a number");
    return j.get<double>();
}

const json& need(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string("model file: missing '") + key + "'");
    return j.at(key);
}

}  // namespace

std::string spec_to_json(const ModelSpec& spec) { return spec_json(spec).dump(2); }

ModelSpec spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        return spec_from(j);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config has a value of the wrong type: ") + e.what());
    }
}

std::string serialize_model(const FittedModel& model) {
    json terms = json::array();
    for (const auto& t : model.terms) {
        json bases = json::array();
        for (const auto& b : t.bases) bases.push_back({{"degree", b.degree()}, {"breakpoints", b.breakpoints()}});
        terms.push_back({{"lambda", number(t.lambda)},
                         {"lambda_fixed", t.lambda_fixed},
                         {"sigma2_alpha", number(t.sigma2_alpha)},
                         {"edf", number(t.edf)},
                         {"degenerate", t.degenerate},
                         {"bases", bases},
                         {"coefficients", t.coefficients}});
    }
    const auto& d = model.diagnostics;
    json out{{"format", "tensorsmooth-model"},
             {"version", kModelFormatVersion},
             {"spec", spec_json(model.spec)},
             {"sigma2_eps", number(model.sigma2_eps)},
             {"terms", terms},
             {"diagnostics",
              {{"path", d.path},
               {"converged", d.converged},
               {"outer_iterations", d.outer_iterations},
               {"cg_iterations", d.cg_iterations},
               {"fisher_iterations", d.fisher_iterations},
               {"probe_seed", d.probe_seed},
               {"probes", d.probes}}}};
    return out.dump(1) + "\n";
}

FittedModel deserialize_model(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (!j.is_object() || need(j, "format") != "tensorsmooth-model")
            throw SchemaError("not a tensorsmooth model file");
        const auto& version = need(j, "version");
        if (!version.is_number_integer()) throw SchemaError("model file: version must be an integer");
        if (version.get<long long>() != kModelFormatVersion)
            throw VersionError("model file version " + version.dump() + " is not supported (expected " +
                               std::to_string(kModelFormatVersion) + ")");
        FittedModel m;
        try {
            m.spec = spec_from(need(j, "spec"));
            m.spec.validate();
        } catch (const ConfigError& e) {
            throw SchemaError(std::string("model file spec: ") + e.what());
        }
        m.sigma2_eps = number_from(need(j, "sigma2_eps"));
        const auto& terms = need(j, "terms");
        if (!terms.is_array() || terms.size() != m.spec.terms.size())
            throw SchemaError("model file: term count does not match 'spec'");
        for (std::size_t k = 0; k < terms.size(); ++k) {
            const auto& t = terms[k];
            TermFit tf;
            tf.lambda = number_from(need(t, "lambda"));
            tf.lambda_fixed = need(t, "lambda_fixed").get<bool>();
            tf.sigma2_alpha = number_from(need(t, "sigma2_alpha"));
            tf.edf = number_from(need(t, "edf"));
            tf.degenerate = need(t, "degenerate").get<bool>();
            const auto& bases = need(t, "bases");
            if (!bases.is_array() || bases.size() != m.spec.terms[k].dimensions.size())
                throw SchemaError("model file: term " + std::to_string(k) + " basis count does not match 'spec'");
            std::size_t K = 1;
            for (const auto& b : bases) {
                try {
                    tf.bases.emplace_back(need(b, "breakpoints").get<std::vector<double>>(),
                                          need(b, "degree").get<int>());
                } catch (const InvalidArgument& e) {
                    throw SchemaError("model file: term " + std::to_string(k) + ": " + e.what());
                }
                K *= tf.bases.back().dimension();
            }
            tf.coefficients = need(t, "coefficients").get<std::vector<double>>();
            if (tf.coefficients.size() != K)
                throw SchemaError("model file: term " + std::to_string(k) + " has " +
                                  std::to_string(tf.coefficients.size()) + " coefficients, bases need " +
                                  std::to_string(K));
            m.terms.push_back(std::move(tf));
        }
        const auto& d = need(j, "diagnostics");
        m.diagnostics.path = need(d, "path").get<std::string>();
        m.diagnostics.converged = need(d, "converged").get<bool>();
        m.diagnostics.outer_iterations = need(d, "outer_iterations").get<std::size_t>();
        m.diagnostics.cg_iterations = need(d, "cg_iterations").get<std::size_t>();
        m.diagnostics.fisher_iterations = need(d, "fisher_iterations").get<std::size_t>();
        m.diagnostics.probe_seed = need(d, "probe_seed").get<std::uint64_t>();
        m.diagnostics.probes = need(d, "probes").get<std::size_t>();
        return m;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model file has a malformed field: ") + e.what());
    }
}

void save(const FittedModel& model, const std::string& path) {
    const std::string text = serialize_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + path + "' failed");
}

FittedModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read from '" + path + "' failed");
    return deserialize_model(buf.str());
}

}  // namespace tensorsmooth
