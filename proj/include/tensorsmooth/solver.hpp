#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tensorsmooth/linalg.hpp"
#include "tensorsmooth/penalty.hpp"
#include "tensorsmooth/tensor_ops.hpp"

namespace tensorsmooth {

/// A symmetric positive definite operator known only through its action,
/// optionally with its diagonal (needed for Jacobi preconditioning).
class LinearOperator {
public:
    using ApplyFn = std::function<void(std::span<const double>, std::span<double>)>;

    LinearOperator(std::size_t dimension, ApplyFn apply, std::optional<Vector> diagonal = {});

    std::size_t dimension() const noexcept { return dimension_; }
    void apply(std::span<const double> x, std::span<double> out) const;
    Vector apply(std::span<const double> x) const;
    bool has_diagonal() const noexcept { return diagonal_.has_value(); }
    const Vector& diagonal() const;

    /// Orthogonal projection onto a subspace on which the operator is
    /// definite.  CG then solves the Galerkin system P A P x = P b with x in
    /// range(P); for a singular but consistent A that is a solution of A x = b.
    using ProjectFn = std::function<void(std::span<double>)>;
    void set_projection(ProjectFn project) { project_ = std::move(project); }
    const ProjectFn& projection() const noexcept { return project_; }

private:
    std::size_t dimension_;
    ApplyFn apply_;
    std::optional<Vector> diagonal_;
    ProjectFn project_;
};

enum class Preconditioner { none, jacobi };

enum class CgCriterion {
    relative,          ///< ||r||_2 <= tol * ||b||_2
    absolute_squared,  ///< ||r||_2^2 <= tol
};

struct CgConfig {
    double tol = 1e-8;
    CgCriterion criterion = CgCriterion::relative;
    /// 0 selects default_max_iterations(K)
    std::size_t max_iter = 0;
    Preconditioner preconditioner = Preconditioner::jacobi;
    /// called after every iteration with the iteration count and current iterate
    std::function<void(std::size_t, std::span<const double>)> observer;
};

struct CgReport {
    std::size_t iterations = 0;
    double final_residual_norm = 0.0;
    bool converged = false;
    /// ||r||_2 before the first iteration and after each one
    std::vector<double> residual_history;
};

struct CgResult {
    Vector solution;
    CgReport report;
};

/// 10 K, capped at 50,000.
std::size_t default_max_iterations(std::size_t dimension) noexcept;

/// Preconditioned conjugate gradients.  Reaching max_iter is not an error:
/// the report says converged = false and the caller decides.
CgResult cg_solve(const LinearOperator& op, std::span<const double> b, const CgConfig& config = {},
                  std::span<const double> initial_guess = {});

/// cg_solve from `initial_guess`, rerun from zero when that fails.  A warm
/// start carrying a large null-space component of a singular (but consistent)
/// system can break down where a cold start does not.  Iterations add up.
CgResult cg_solve_warm(const LinearOperator& op, std::span<const double> b, const CgConfig& config,
                       std::span<const double> initial_guess);

/// Phi^T diag(w2) Phi + lambda Lambda with its implicit diagonal.  The operator
/// keeps references to `design` and `penalty`; both must outlive it.
LinearOperator make_fit_operator(const TensorDesign& design, const PenaltyOperator& penalty,
                                 double lambda, std::span<const double> w2 = {});

Preconditioner parse_preconditioner(std::string_view name);

}  // namespace tensorsmooth
