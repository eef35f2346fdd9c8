#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tensorsmooth/linalg.hpp"

namespace tensorsmooth {

enum class KnotPlacement { equidistant, quantile };

/// B-spline basis of degree q on [a, b] with breakpoints a = k_0 < ... < k_{m+1} = b.
///
/// The extended knot vector repeats each boundary knot q extra times
/// (clamped convention), which yields exactly J = m + q + 1 basis functions
/// on the closed interval.  Evaluation outside [a, b] is an error.
///
/// Immutable after construction; evaluation is safe from multiple threads.
class UnivariateBasis {
public:
    UnivariateBasis(std::vector<double> breakpoints, int degree);

    int degree() const noexcept { return degree_; }
    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t interior_knots() const noexcept { return breakpoints_.size() - 2; }
    double lower() const noexcept { return breakpoints_.front(); }
    double upper() const noexcept { return breakpoints_.back(); }
    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    const std::vector<double>& extended_knots() const noexcept { return knots_; }
    bool contains(double x) const noexcept { return x >= lower() && x <= upper(); }

    /// Derivatives of order `deriv` of all J basis functions at x.
    Vector eval_row(double x, int deriv = 0) const;

    /// Writes the q+1 possibly nonzero values into `out` and returns the
    /// index of the first of them.
    std::size_t eval_nonzero(double x, int deriv, std::span<double> out) const;

private:
    std::size_t find_span(double x) const;

    std::vector<double> breakpoints_;
    std::vector<double> knots_;
    int degree_;
    std::size_t dimension_;
};

/// Basis on [lower, upper] with m interior knots.  Quantile placement uses
/// `data` (which must lie in [lower, upper]); tied quantiles are nudged apart
/// and a DuplicateKnotError is raised when that is impossible.
UnivariateBasis build_basis(double lower, double upper, int n_interior_knots, int degree,
                            KnotPlacement placement = KnotPlacement::equidistant,
                            std::span<const double> data = {});

/// (J - r) x J matrix of r-th order backward differences.
DenseMatrix difference_matrix(std::size_t J, int order);

/// Gram matrix of the order-r derivatives, integrated over the basis domain
/// with per-interval Gauss-Legendre quadrature (exact for the spline degree).
DenseMatrix derivative_gram(const UnivariateBasis& basis, int order);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace tensorsmooth
