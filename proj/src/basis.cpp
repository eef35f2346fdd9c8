#include "tensorsmooth/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tensorsmooth/errors.hpp"

namespace tensorsmooth {

UnivariateBasis::UnivariateBasis(std::vector<double> breakpoints, int degree)
    : breakpoints_(std::move(breakpoints)), degree_(degree) {
    if (degree_ < 0) throw InvalidArgument("basis degree must be non-negative");
    if (breakpoints_.size() < 2) throw InvalidArgument("basis needs at least two breakpoints");
    for (double k : breakpoints_)
        if (!std::isfinite(k)) throw InvalidArgument("basis breakpoints must be finite");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i)
        if (!(breakpoints_[i] > breakpoints_[i - 1]))
            throw DuplicateKnotError("basis breakpoints must be strictly increasing (index " +
                                     std::to_string(i) + ")");

    const auto q = static_cast<std::size_t>(degree_);
    knots_.reserve(breakpoints_.size() + 2 * q);
    knots_.insert(knots_.end(), q, breakpoints_.front());
    knots_.insert(knots_.end(), breakpoints_.begin(), breakpoints_.end());
    knots_.insert(knots_.end(), q, breakpoints_.back());
    dimension_ = interior_knots() + q + 1;
}

std::size_t UnivariateBasis::find_span(double x) const {
    const auto q = static_cast<std::size_t>(degree_);
    const std::size_t last = dimension_ - 1;
    if (x >= knots_[last + 1]) return last;
    // first knot in [q, last+1] strictly greater than x, minus one
    const auto first = knots_.begin() + static_cast<std::ptrdiff_t>(q);
    const auto end = knots_.begin() + static_cast<std::ptrdiff_t>(last + 2);
    const auto it = std::upper_bound(first, end, x);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
}

std::size_t UnivariateBasis::eval_nonzero(double x, int deriv, std::span<double> out) const {
    const int p = degree_;
    if (deriv < 0 || deriv > p)
        throw InvalidArgument("derivative order " + std::to_string(deriv) +
                              " exceeds basis degree " + std::to_string(p));
    if (out.size() != static_cast<std::size_t>(p + 1))
        throw DimensionError("eval_nonzero: output must have degree+1 entries");
    if (!(x >= lower() && x <= upper()))
        throw DomainError("evaluation point " + std::to_string(x) + " outside basis domain [" +
                          std::to_string(lower()) + ", " + std::to_string(upper()) + "]");

    const std::size_t span = find_span(x);
    const auto& U = knots_;
    const auto w = static_cast<std::size_t>(p + 1);

    // Cox-de Boor triangle and derivative recurrences (Piegl & Tiller A2.3).
    std::vector<double> ndu(w * w, 0.0);
    std::vector<double> left(w, 0.0), right(w, 0.0);
    auto NDU = [&](int r, int c) -> double& { return ndu[static_cast<std::size_t>(r) * w + c]; };
    NDU(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - U[span + 1 - j];
        right[j] = U[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            NDU(j, r) = right[r + 1] + left[j - r];
            const double temp = NDU(r, j - 1) / NDU(j, r);
            NDU(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        NDU(j, j) = saved;
    }

    if (deriv == 0) {
        for (int j = 0; j <= p; ++j) out[j] = NDU(j, p);
        return span - static_cast<std::size_t>(p);
    }

    std::vector<double> a(2 * w, 0.0);
    auto A = [&](int s, int c) -> double& { return a[static_cast<std::size_t>(s) * w + c]; };
    const int n = deriv;
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        std::fill(a.begin(), a.end(), 0.0);
        A(0, 0) = 1.0;
        double d = 0.0;
        for (int k = 1; k <= n; ++k) {
            d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                A(s2, 0) = A(s1, 0) / NDU(pk + 1, rk);
                d = A(s2, 0) * NDU(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                A(s2, j) = (A(s1, j) - A(s1, j - 1)) / NDU(pk + 1, rk + j);
                d += A(s2, j) * NDU(rk + j, pk);
            }
            if (r <= pk) {
                A(s2, k) = -A(s1, k - 1) / NDU(pk + 1, r);
                d += A(s2, k) * NDU(r, pk);
            }
            std::swap(s1, s2);
        }
        out[r] = d;
    }
    double factor = p;
    for (int k = 1; k < n; ++k) factor *= (p - k);
    for (int j = 0; j <= p; ++j) out[j] *= factor;
    return span - static_cast<std::size_t>(p);
}

Vector UnivariateBasis::eval_row(double x, int deriv) const {
    Vector local(static_cast<std::size_t>(degree_ + 1));
    const std::size_t first = eval_nonzero(x, deriv, local);
    Vector row(dimension_, 0.0);
    for (std::size_t t = 0; t < local.size(); ++t) row[first + t] = local[t];
    return row;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double prob) {
    const double pos = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

UnivariateBasis build_basis(double lower, double upper, int n_interior_knots, int degree,
                            KnotPlacement placement, std::span<const double> data) {
    if (!(lower < upper)) throw InvalidArgument("basis domain requires lower < upper");
    if (n_interior_knots < 0) throw InvalidArgument("number of interior knots must be >= 0");
    const auto m = static_cast<std::size_t>(n_interior_knots);
    std::vector<double> breaks(m + 2);
    breaks.front() = lower;
    breaks.back() = upper;
    const double width = upper - lower;

    if (placement == KnotPlacement::equidistant) {
        for (std::size_t j = 1; j <= m; ++j)
            breaks[j] = lower + width * static_cast<double>(j) / static_cast<double>(m + 1);
    } else {
        if (data.empty()) throw InvalidArgument("quantile knot placement requires data");
        std::vector<double> sorted(data.begin(), data.end());
        std::sort(sorted.begin(), sorted.end());
        if (sorted.front() < lower || sorted.back() > upper)
            throw DomainError("quantile knot placement: data outside basis domain");
        const double nudge = 1e-6 * width;
        for (std::size_t j = 1; j <= m; ++j) {
            double k = quantile_sorted(sorted, static_cast<double>(j) / static_cast<double>(m + 1));
            if (k <= breaks[j - 1]) k = breaks[j - 1] + nudge;
            breaks[j] = k;
        }
        for (std::size_t j = 1; j <= m; ++j)
            if (!(breaks[j] < upper))
                throw DuplicateKnotError("quantile knot placement: ties leave no room for interior knot " +
                                         std::to_string(j));
    }
    return UnivariateBasis(std::move(breaks), degree);
}

DenseMatrix difference_matrix(std::size_t J, int order) {
    if (order < 1) throw InvalidArgument("difference order must be >= 1");
    const auto r = static_cast<std::size_t>(order);
    if (r >= J)
        throw OrderTooHighError("difference order " + std::to_string(order) +
                                " must be smaller than basis dimension " + std::to_string(J));
    // binomial stencil with alternating signs, highest power on the right
    std::vector<double> stencil(r + 1, 0.0);
    double binom = 1.0;
    for (std::size_t s = 0; s <= r; ++s) {
        stencil[s] = ((r - s) % 2 == 0 ? 1.0 : -1.0) * binom;
        binom = binom * static_cast<double>(r - s) / static_cast<double>(s + 1);
    }
    DenseMatrix D(J - r, J);
    for (std::size_t t = 0; t < J - r; ++t)
        for (std::size_t s = 0; s <= r; ++s) D(t, t + s) = stencil[s];
    return D;
}

void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = pk;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

DenseMatrix derivative_gram(const UnivariateBasis& basis, int order) {
    if (order < 0 || order > basis.degree())
        throw InvalidArgument("derivative Gram order " + std::to_string(order) +
                              " exceeds basis degree " + std::to_string(basis.degree()));
    const std::size_t J = basis.dimension();
    const auto w = static_cast<std::size_t>(basis.degree() + 1);
    std::vector<double> nodes, weights;
    gauss_legendre(w, nodes, weights);

    DenseMatrix G(J, J);
    Vector vals(w);
    const auto& br = basis.breakpoints();
    for (std::size_t i = 0; i + 1 < br.size(); ++i) {
        const double half = 0.5 * (br[i + 1] - br[i]);
        const double mid = 0.5 * (br[i + 1] + br[i]);
        for (std::size_t g = 0; g < w; ++g) {
            const double x = mid + half * nodes[g];
            const double wt = half * weights[g];
            const std::size_t first = basis.eval_nonzero(x, order, vals);
            for (std::size_t a = 0; a < w; ++a)
                for (std::size_t b = 0; b < w; ++b)
                    G(first + a, first + b) += wt * vals[a] * vals[b];
        }
    }
    // exact symmetry
    for (std::size_t a = 0; a < J; ++a)
        for (std::size_t b = a + 1; b < J; ++b) {
            const double s = 0.5 * (G(a, b) + G(b, a));
            G(a, b) = s;
            G(b, a) = s;
        }
    return G;
}

}  // namespace tensorsmooth
