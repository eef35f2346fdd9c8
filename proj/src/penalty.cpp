#include "tensorsmooth/penalty.hpp"

#include <algorithm>
#include <string>

#include "tensorsmooth/errors.hpp"

namespace tensorsmooth {

PenaltyOperator::PenaltyOperator(PenaltyKind kind, std::size_t dimension,
                                 std::vector<PenaltyTerm> terms)
    : kind_(kind), dimension_(dimension), terms_(std::move(terms)) {
    for (const auto& term : terms_)
        for (const auto& f : term.chain)
            if (f.dimension() != dimension_)
                throw DimensionError("penalty term factor dimension " + std::to_string(f.dimension()) +
                                     " != K = " + std::to_string(dimension_));
}

void PenaltyOperator::apply(std::span<const double> alpha, std::span<double> out) const {
    if (alpha.size() != dimension_ || out.size() != dimension_)
        throw DimensionError("penalty apply: vector length != K = " + std::to_string(dimension_));
    std::fill(out.begin(), out.end(), 0.0);
    Vector work(dimension_);
    for (const auto& term : terms_) {
        std::copy(alpha.begin(), alpha.end(), work.begin());
        apply_normal_factor_chain_in_place(term.chain, work);
        axpy(term.weight, work, out);
    }
}

Vector PenaltyOperator::apply(std::span<const double> alpha) const {
    Vector out(dimension_);
    apply(alpha, out);
    return out;
}

Vector PenaltyOperator::diagonal() const {
    Vector diag(dimension_, 0.0);
    for (const auto& term : terms_) {
        Vector d(dimension_, 1.0);
        for (const auto& f : term.chain) {
            const Vector fd = f.diagonal();
            for (std::size_t k = 0; k < dimension_; ++k) d[k] *= fd[k];
        }
        axpy(term.weight, d, diag);
    }
    return diag;
}

std::vector<std::size_t> basis_dimensions(std::span<const UnivariateBasis> bases) {
    std::vector<std::size_t> dims;
    dims.reserve(bases.size());
    for (const auto& b : bases) dims.push_back(b.dimension());
    return dims;
}

namespace {

struct Layout {
    std::vector<std::size_t> left, right;
    std::size_t total = 1;
};

Layout layout_of(std::span<const std::size_t> dims) {
    Layout l;
    const std::size_t P = dims.size();
    l.left.assign(P, 1);
    l.right.assign(P, 1);
    for (std::size_t p = 1; p < P; ++p) l.left[p] = l.left[p - 1] * dims[p - 1];
    for (std::size_t p = P - 1; p > 0; --p) l.right[p - 1] = l.right[p] * dims[p];
    for (auto d : dims) l.total *= d;
    return l;
}

}  // namespace

PenaltyOperator build_difference_penalty(std::span<const std::size_t> dims,
                                         std::span<const int> orders) {
    if (dims.empty()) throw DimensionError("difference penalty needs at least one dimension");
    if (orders.size() != dims.size())
        throw DimensionError("difference penalty: one order per dimension required");
    const Layout layout = layout_of(dims);
    std::vector<PenaltyTerm> terms;
    for (std::size_t p = 0; p < dims.size(); ++p) {
        const DenseMatrix D = difference_matrix(dims[p], orders[p]);
        PenaltyTerm term;
        term.chain.emplace_back(layout.left[p], D.gram(), layout.right[p]);
        term.orders.assign(dims.size(), 0);
        term.orders[p] = orders[p];
        terms.push_back(std::move(term));
    }
    return PenaltyOperator(PenaltyKind::difference, layout.total, std::move(terms));
}

PenaltyOperator build_difference_penalty(std::span<const UnivariateBasis> bases,
                                         std::span<const int> orders) {
    const auto dims = basis_dimensions(bases);
    return build_difference_penalty(dims, orders);
}

PenaltyOperator build_curvature_penalty(std::span<const UnivariateBasis> bases) {
    if (bases.empty()) throw DimensionError("curvature penalty needs at least one dimension");
    for (std::size_t p = 0; p < bases.size(); ++p)
        if (bases[p].degree() < 2)
            throw InvalidArgument("curvature penalty requires degree >= 2 in every dimension (dimension " +
                                  std::to_string(p) + " has degree " +
                                  std::to_string(bases[p].degree()) + ")");
    const auto dims = basis_dimensions(bases);
    const Layout layout = layout_of(dims);
    const std::size_t P = bases.size();

    std::vector<DenseMatrix> gram[3];
    for (int r = 0; r <= 2; ++r)
        for (const auto& b : bases) gram[r].push_back(derivative_gram(b, r));

    auto make_term = [&](std::vector<int> orders, double weight) {
        PenaltyTerm term;
        term.weight = weight;
        for (std::size_t p = 0; p < P; ++p)
            term.chain.emplace_back(layout.left[p], gram[orders[p]][p], layout.right[p]);
        term.orders = std::move(orders);
        return term;
    };

    // |r| = 2: pure second derivatives (2/2! = 1) and mixed pairs (2/(1!1!) = 2)
    std::vector<PenaltyTerm> terms;
    for (std::size_t p1 = 0; p1 < P; ++p1)
        for (std::size_t p2 = p1; p2 < P; ++p2) {
            std::vector<int> orders(P, 0);
            orders[p1] += 1;
            orders[p2] += 1;
            terms.push_back(make_term(std::move(orders), p1 == p2 ? 1.0 : 2.0));
        }
    return PenaltyOperator(PenaltyKind::curvature, layout.total, std::move(terms));
}

double penalty_quadratic_form(const PenaltyOperator& penalty, std::span<const double> alpha) {
    const Vector la = penalty.apply(alpha);
    return dot(alpha, la);
}

}  // namespace tensorsmooth
