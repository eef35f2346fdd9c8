#include "tensorsmooth/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tensorsmooth/diagnostics.hpp"
#include "tensorsmooth/errors.hpp"
#include "tensorsmooth/model.hpp"
#include "tensorsmooth/parallel.hpp"
#include "tensorsmooth/table.hpp"

namespace tensorsmooth {

namespace {

using nlohmann::json;

struct Flags {
    std::string data, config, out, report, model;
    std::uint64_t seed = 42;
    std::size_t probes = 5;
    double lambda = 0.0;
    std::string family, penalty;
    int threads = 1;
    double tol_lambda = 1e-4, tol_cg = 1e-8;
    std::string response;
    std::vector<std::string> covariates;
    int knots = 10, degree = 3;
    std::string scenario = "smooth_2d";
    std::size_t n = 1000;
    double noise = 0.1;
};

struct Given {
    CLI::Option *seed = nullptr, *probes = nullptr, *lambda = nullptr, *threads = nullptr, *tol_lambda = nullptr,
                *tol_cg = nullptr, *knots = nullptr, *degree = nullptr;
    static bool set(const CLI::Option* o) { return o && o->count() > 0; }
};

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void resolve_threads(const Flags& f, const Given& g) {
    int threads = 1;
    if (Given::set(g.threads)) {
        threads = f.threads;
    } else if (const char* env = std::getenv("TENSORSMOOTH_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1 || v > 1024)
            throw ConfigError(std::string("TENSORSMOOTH_THREADS must be a positive integer, got '") + env + "'");
        threads = static_cast<int>(v);
    }
    if (threads < 1) throw ConfigError("--threads must be >= 1");
    set_thread_count(threads);
}

/// Config file first, flags on top.  Without any term definition the model
/// is one tensor term over every column except the response and `truth`.
ModelSpec build_spec(const Flags& f, const Given& g, const Table* data, int default_knots) {
    ModelSpec spec = f.config.empty() ? ModelSpec() : spec_from_json(read_text(f.config));
    if (!f.response.empty()) spec.response = f.response;
    if (!f.family.empty()) spec.family = Family::parse(f.family);
    if (Given::set(g.seed)) spec.trace.seed = f.seed;
    if (Given::set(g.probes)) spec.trace.probes = f.probes;
    if (Given::set(g.tol_lambda)) spec.tol_lambda = f.tol_lambda;
    if (Given::set(g.tol_cg)) spec.cg.tol = f.tol_cg;

    std::vector<std::string> covariates = f.covariates;
    if (covariates.empty() && spec.terms.empty() && data)
        for (const auto& name : data->names())
            if (name != spec.response && name != "truth" && name != "prediction") covariates.push_back(name);
    if (!covariates.empty()) {
        TermSpec term;
        for (const auto& c : covariates) {
            DimensionSpec d;
            d.column = c;
            d.n_interior_knots = default_knots;
            term.dimensions.push_back(d);
        }
        spec.terms = {term};
    }
    for (auto& t : spec.terms) {
        for (auto& d : t.dimensions) {
            if (Given::set(g.knots)) d.n_interior_knots = f.knots;
            if (Given::set(g.degree)) d.degree = f.degree;
        }
        if (!f.penalty.empty()) {
            if (f.penalty == "diff" || f.penalty == "difference") t.penalty = PenaltyKind::difference;
            else if (f.penalty == "curv" || f.penalty == "curvature") t.penalty = PenaltyKind::curvature;
            else throw ConfigError("--penalty must be diff or curv, got '" + f.penalty + "'");
        }
        if (Given::set(g.lambda)) t.fixed_lambda = f.lambda;
    }
    spec.validate();
    return spec;
}

Table read_data(const std::string& path) {
    if (path.empty()) throw ConfigError("--data is required");
    return read_csv_file(path);
}

template <class Write>
void emit(const std::string& path, std::ostream& out, Write&& write) {
    if (path.empty() || path == "-") {
        write(out);
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open '" + path + "' for writing");
    write(file);
    if (!file) throw IoError("write to '" + path + "' failed");
}

int cmd_fit(const Flags& f, const Given& g, std::ostream& out, std::ostream& err) {
    resolve_threads(f, g);
    const Table data = read_data(f.data);
    const ModelSpec spec = build_spec(f, g, &data, 10);
    const FittedModel model = fit(spec, data);
    const std::string model_path = f.out.empty() ? "model.json" : f.out;
    save(model, model_path);

    const auto& d = model.diagnostics;
    json terms = json::array();
    for (std::size_t j = 0; j < model.terms.size(); ++j) {
        const auto& t = model.terms[j];
        json cols = json::array();
        for (const auto& dim : spec.terms[j].dimensions) cols.push_back(dim.column);
        terms.push_back({{"covariates", cols},
                         {"lambda", t.lambda},
                         {"lambda_status", t.lambda_fixed ? "fixed" : "estimated"},
                         {"sigma2_alpha", t.sigma2_alpha},
                         {"edf", t.edf},
                         {"degenerate", t.degenerate},
                         {"coefficients", t.coefficients.size()}});
    }
    const json report{{"command", "fit"},
                      {"config", json::parse(spec_to_json(spec))},
                      {"threads", thread_count()},
                      {"data", f.data},
                      {"rows", data.rows()},
                      {"model", model_path},
                      {"path", d.path},
                      {"converged", d.converged},
                      {"terms", terms},
                      {"sigma2_eps", model.sigma2_eps},
                      {"outer_iterations", d.outer_iterations},
                      {"cg_iterations", d.cg_iterations},
                      {"fisher_iterations", d.fisher_iterations},
                      {"trace_probes", d.probes},
                      {"probe_seed", d.probe_seed},
                      {"wall_seconds", d.wall_seconds},
                      {"peak_memory_bytes", d.peak_bytes},
                      {"largest_allocation_bytes", d.largest_allocation}};
    emit(f.report, out, [&](std::ostream& s) { s << report.dump(2) << '\n'; });
    if (!d.converged) {
        err << "tensorsmooth fit: smoothing parameter iteration stopped after " << d.outer_iterations
            << " iterations without meeting the lambda tolerance\n";
        return exit_non_convergence;
    }
    return exit_ok;
}

int cmd_predict(const Flags& f, const Given& g, std::ostream& out) {
    resolve_threads(f, g);
    const FittedModel model = load(f.model);
    Table data = read_data(f.data);
    Vector pred = predict(model, data);
    data.set("prediction", std::move(pred));
    emit(f.out, out, [&](std::ostream& s) { write_csv(s, data); });
    return exit_ok;
}

int cmd_simulate(const Flags& f, std::ostream& out) {
    const Simulation sim = simulate(f.scenario, f.n, f.noise, f.seed);
    emit(f.out, out, [&](std::ostream& s) { write_csv(s, sim.data); });
    return exit_ok;
}

int cmd_trace_check(const Flags& f, const Given& g, std::ostream& out) {
    resolve_threads(f, g);
    constexpr std::uint64_t fixture_seed = 7;
    const Table data = f.data.empty() ? simulate("smooth_2d", 1000, 0.1, fixture_seed).data : read_data(f.data);
    const ModelSpec spec = build_spec(f, g, &data, 8);
    if (spec.terms.size() != 1) throw ConfigError("trace-check works on a single term");
    const TermDesign term = build_term_design(spec.terms[0], data);
    if (term.design->dimension() > kDenseTraceLimit)
        throw ConfigError("trace-check needs K <= " + std::to_string(kDenseTraceLimit) + " for the dense trace, got K = " +
                          std::to_string(term.design->dimension()));
    const std::size_t max_probes = Given::set(g.probes) ? f.probes : 30;

    double lambda = f.lambda;
    if (!Given::set(g.lambda)) {
        FixedPointConfig cfg;
        cfg.lambda0 = spec.lambda0;
        cfg.tol_lambda = spec.tol_lambda;
        cfg.cg = spec.cg;
        cfg.trace = spec.trace;
        lambda = fixed_point_fit(*term.design, *term.penalty, data.column(spec.response), cfg).lambda;
    }
    const auto rows = trace_convergence(*term.design, *term.penalty, lambda, max_probes, spec.trace.seed, spec.cg);
    Vector m, est, exact, rel;
    for (const auto& r : rows) {
        m.push_back(static_cast<double>(r.probes));
        est.push_back(r.estimate);
        exact.push_back(r.exact);
        rel.push_back(r.relative_error);
    }
    Table table;
    table.set("M", std::move(m));
    table.set("estimate", std::move(est));
    table.set("exact", std::move(exact));
    table.set("relative_error", std::move(rel));
    emit(f.out, out, [&](std::ostream& s) { write_csv(s, table); });
    return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tensor product P-spline smoothing with matrix-free fitting", "tensorsmooth"};
    app.require_subcommand(1);
    Flags f;

    auto add_fit_flags = [&](CLI::App* sub, Given& g) {
        sub->add_option("--data", f.data, "input CSV with header row");
        sub->add_option("--config", f.config, "JSON model configuration");
        g.seed = sub->add_option("--seed", f.seed, "probe vector seed");
        g.probes = sub->add_option("--probes", f.probes, "number of Hutchinson probe vectors M");
        g.lambda = sub->add_option("--lambda", f.lambda, "fix lambda for every term");
        sub->add_option("--family", f.family, "gaussian_identity, gaussian_log, poisson_log or binomial_logit");
        sub->add_option("--penalty", f.penalty, "diff or curv");
        g.threads = sub->add_option("--threads", f.threads, "worker threads (default TENSORSMOOTH_THREADS or 1)");
        g.tol_lambda = sub->add_option("--tol-lambda", f.tol_lambda, "relative lambda tolerance");
        g.tol_cg = sub->add_option("--tol-cg", f.tol_cg, "relative CG residual tolerance");
        sub->add_option("--response", f.response, "response column (default y)");
        sub->add_option("--covariates", f.covariates, "covariate columns of a single tensor term")->delimiter(',');
        g.knots = sub->add_option("--knots", f.knots, "interior knots per dimension");
        g.degree = sub->add_option("--degree", f.degree, "spline degree");
    };

    Given fit_given, trace_given, predict_given;
    auto* fit_cmd = app.add_subcommand("fit", "fit a model and write the model file and a JSON report");
    add_fit_flags(fit_cmd, fit_given);
    fit_cmd->add_option("--out,--model", f.out, "model file to write (default model.json)");
    fit_cmd->add_option("--report", f.report, "write the report here instead of stdout");

    auto* predict_cmd = app.add_subcommand("predict", "predict means for new data");
    predict_cmd->add_option("--model", f.model, "model file")->required();
    predict_cmd->add_option("--data", f.data, "input CSV")->required();
    predict_cmd->add_option("--out", f.out, "output CSV (default stdout)");
    predict_given.threads = predict_cmd->add_option("--threads", f.threads, "worker threads");

    auto* sim_cmd = app.add_subcommand("simulate", "write a synthetic data set");
    sim_cmd->add_option("--scenario", f.scenario, "smooth_2d, smooth_3d, smooth_4d, additive_2plus2 or loglink_2d");
    sim_cmd->add_option("--n", f.n, "number of rows");
    sim_cmd->add_option("--noise", f.noise, "noise standard deviation");
    sim_cmd->add_option("--seed", f.seed, "random seed");
    sim_cmd->add_option("--out", f.out, "output CSV (default stdout)");

    auto* trace_cmd = app.add_subcommand("trace-check", "Hutchinson trace estimate against the dense trace");
    add_fit_flags(trace_cmd, trace_given);
    trace_cmd->add_option("--out", f.out, "output CSV (default stdout)");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    if (argv.empty()) argv.push_back("tensorsmooth");
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "tensorsmooth: " << e.what() << '\n';
        return exit_bad_config;
    }

    const char* name = "tensorsmooth";
    try {
        if (*fit_cmd) {
            name = "tensorsmooth fit";
            return cmd_fit(f, fit_given, out, err);
        }
        if (*predict_cmd) {
            name = "tensorsmooth predict";
            return cmd_predict(f, predict_given, out);
        }
        if (*sim_cmd) {
            name = "tensorsmooth simulate";
            return cmd_simulate(f, out);
        }
        if (*trace_cmd) {
            name = "tensorsmooth trace-check";
            return cmd_trace_check(f, trace_given, out);
        }
    } catch (const ConfigError& e) {
        err << name << ": configuration error: " << e.what() << '\n';
        return exit_bad_config;
    } catch (const InvalidArgument& e) {
        err << name << ": configuration error: " << e.what() << '\n';
        return exit_bad_config;
    } catch (const InputError& e) {
        err << name << ": data error: " << e.what() << '\n';
        return exit_bad_data;
    } catch (const DomainError& e) {
        err << name << ": data error: " << e.what() << '\n';
        return exit_bad_data;
    } catch (const SchemaError& e) {
        err << name << ": model file error: " << e.what() << '\n';
        return exit_bad_data;
    } catch (const VersionError& e) {
        err << name << ": model file error: " << e.what() << '\n';
        return exit_bad_data;
    } catch (const IoError& e) {
        err << name << ": I/O error: " << e.what() << '\n';
        return exit_bad_data;
    } catch (const NonConvergenceError& e) {
        err << name << ": did not converge: " << e.what() << '\n';
        return exit_non_convergence;
    } catch (const DegenerateFitError& e) {
        err << name << ": did not converge: " << e.what() << '\n';
        return exit_non_convergence;
    } catch (const TraceEstimationError& e) {
        err << name << ": did not converge: " << e.what() << '\n';
        return exit_non_convergence;
    } catch (const std::exception& e) {
        err << name << ": internal error: " << e.what() << '\n';
        return exit_internal;
    }
    return exit_internal;
}

}  // namespace tensorsmooth
