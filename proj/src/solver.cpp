#include "tensorsmooth/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tensorsmooth/errors.hpp"

namespace tensorsmooth {

LinearOperator::LinearOperator(std::size_t dimension, ApplyFn apply, std::optional<Vector> diagonal)
    : dimension_(dimension), apply_(std::move(apply)), diagonal_(std::move(diagonal)) {
    if (!apply_) throw InvalidArgument("LinearOperator needs an apply function");
    if (diagonal_ && diagonal_->size() != dimension_)
        throw DimensionError("LinearOperator diagonal length != dimension");
}

void LinearOperator::apply(std::span<const double> x, std::span<double> out) const {
    if (x.size() != dimension_ || out.size() != dimension_)
        throw DimensionError("LinearOperator apply: vector length != " + std::to_string(dimension_));
    apply_(x, out);
}

Vector LinearOperator::apply(std::span<const double> x) const {
    Vector out(dimension_);
    apply(x, out);
    return out;
}

const Vector& LinearOperator::diagonal() const {
    if (!diagonal_) throw PreconditionerError("operator has no diagonal");
    return *diagonal_;
}

std::size_t default_max_iterations(std::size_t dimension) noexcept {
    return std::min<std::size_t>(10 * std::max<std::size_t>(dimension, 1), 50000);
}

CgResult cg_solve(const LinearOperator& op, std::span<const double> b, const CgConfig& config,
                  std::span<const double> initial_guess) {
    const std::size_t K = op.dimension();
    if (b.size() != K) throw DimensionError("cg_solve: rhs length != operator dimension");
    if (!initial_guess.empty() && initial_guess.size() != K)
        throw DimensionError("cg_solve: initial guess length != operator dimension");
    if (!(config.tol > 0.0)) throw InvalidArgument("cg_solve: tolerance must be positive");

    const bool jacobi = config.preconditioner == Preconditioner::jacobi;
    const Vector* diag = nullptr;
    if (jacobi) {
        if (!op.has_diagonal()) throw PreconditionerError("Jacobi preconditioner needs the operator diagonal");
        diag = &op.diagonal();
        for (std::size_t k = 0; k < K; ++k)
            if (!((*diag)[k] > 0.0))
                throw PreconditionerError("Jacobi preconditioner: diagonal entry " + std::to_string(k) +
                                          " is not positive");
    }
    const std::size_t max_iter = config.max_iter > 0 ? config.max_iter : default_max_iterations(K);
    const auto& project = op.projection();
    auto restrict_to = [&](std::span<double> u) {
        if (project) project(u);
    };
    Vector r(b.begin(), b.end());
    restrict_to(r);
    const double b_norm = norm2(r);

    CgResult result;
    CgReport& rep = result.report;
    Vector& x = result.solution;

    if (b_norm == 0.0) {
        x.assign(K, 0.0);
        rep.converged = true;
        rep.residual_history.push_back(0.0);
        return result;
    }

    auto converged = [&](double r_sq) {
        if (config.criterion == CgCriterion::absolute_squared) return r_sq <= config.tol;
        return std::sqrt(r_sq) <= config.tol * b_norm;
    };

    // workspace: x, r, p, v and z (z aliases r without preconditioning)
    Vector v(K);
    if (initial_guess.empty()) {
        x.assign(K, 0.0);
    } else {
        x.assign(initial_guess.begin(), initial_guess.end());
        restrict_to(x);
        op.apply(x, v);
        restrict_to(v);
        for (std::size_t k = 0; k < K; ++k) r[k] -= v[k];
    }
    Vector z;
    if (jacobi) z.resize(K);
    auto precondition = [&]() -> const Vector& {
        if (!jacobi) return r;
        for (std::size_t k = 0; k < K; ++k) z[k] = r[k] / (*diag)[k];
        restrict_to(z);
        return z;
    };

    double r_sq = squared_norm(r);
    rep.residual_history.push_back(std::sqrt(r_sq));
    if (converged(r_sq)) {
        rep.converged = true;
        rep.final_residual_norm = std::sqrt(r_sq);
        return result;
    }

    Vector p = precondition();
    double rz = dot(r, p);
    while (rep.iterations < max_iter) {
        op.apply(p, v);
        restrict_to(v);
        const double pv = dot(p, v);
        if (!(pv > 0.0)) break;  // operator not positive definite along p
        const double step = rz / pv;
        for (std::size_t k = 0; k < K; ++k) {
            x[k] += step * p[k];
            r[k] -= step * v[k];
        }
        ++rep.iterations;
        r_sq = squared_norm(r);
        rep.residual_history.push_back(std::sqrt(r_sq));
        if (config.observer) config.observer(rep.iterations, x);
        if (converged(r_sq)) {
            rep.converged = true;
            break;
        }
        const Vector& zk = precondition();
        const double rz_new = dot(r, zk);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t k = 0; k < K; ++k) p[k] = zk[k] + beta * p[k];
    }
    rep.final_residual_norm = std::sqrt(r_sq);
    return result;
}

CgResult cg_solve_warm(const LinearOperator& op, std::span<const double> b, const CgConfig& config,
                       std::span<const double> initial_guess) {
    CgResult first = cg_solve(op, b, config, initial_guess);
    if (first.report.converged || initial_guess.empty()) return first;
    CgResult cold = cg_solve(op, b, config);
    cold.report.iterations += first.report.iterations;
    return cold;
}

LinearOperator make_fit_operator(const TensorDesign& design, const PenaltyOperator& penalty,
                                 double lambda, std::span<const double> w2) {
    if (!(lambda >= 0.0)) throw InvalidArgument("fit operator: lambda must be >= 0");
    if (penalty.dimension() != design.dimension())
        throw DimensionError("fit operator: penalty dimension != design dimension");
    if (!w2.empty()) {
        if (w2.size() != design.rows()) throw DimensionError("fit operator: weight length != n");
        for (double w : w2)
            if (!(w > 0.0)) throw InvalidArgument("fit operator: weights must be positive");
    }
    Vector weights(w2.begin(), w2.end());

    Vector diag = phi_t_phi_diagonal(design, weights);
    if (lambda != 0.0) axpy(lambda, penalty.diagonal(), diag);

    const TensorDesign* d = &design;
    const PenaltyOperator* pen = &penalty;
    auto apply = [d, pen, lambda, weights = std::move(weights)](std::span<const double> a,
                                                                std::span<double> out) {
        Vector fitted = apply_phi(*d, a);
        if (!weights.empty())
            for (std::size_t i = 0; i < fitted.size(); ++i) fitted[i] *= weights[i];
        apply_phi_t(*d, fitted, out);
        if (lambda != 0.0) {
            const Vector pa = pen->apply(a);
            axpy(lambda, pa, out);
        }
    };
    return LinearOperator(design.dimension(), std::move(apply), std::move(diag));
}

Preconditioner parse_preconditioner(std::string_view name) {
    if (name == "none") return Preconditioner::none;
    if (name == "jacobi") return Preconditioner::jacobi;
    throw ConfigError("unknown preconditioner '" + std::string(name) + "'");
}

}  // namespace tensorsmooth
