#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tensorsmooth/basis.hpp"
#include "tensorsmooth/linalg.hpp"
#include "tensorsmooth/tensor_ops.hpp"

namespace tensorsmooth {

enum class PenaltyKind { difference, curvature };

/// One addend of the penalty: weight times a product of normal factors.
struct PenaltyTerm {
    double weight = 1.0;
    std::vector<NormalFactor> chain;
    /// derivative / difference order per dimension, for reporting
    std::vector<int> orders;
};

/// Implicit penalty matrix Lambda.  Difference penalties are a sum of P
/// normal factors I (x) D_p^T D_p (x) I.  Curvature penalties sum, over every
/// multi-index r with |r| = 2, the weight 2/r! times the chain of derivative
/// Gram factors.  Immutable after construction.
class PenaltyOperator {
public:
    PenaltyOperator(PenaltyKind kind, std::size_t dimension, std::vector<PenaltyTerm> terms);

    PenaltyKind kind() const noexcept { return kind_; }
    std::size_t dimension() const noexcept { return dimension_; }
    const std::vector<PenaltyTerm>& terms() const noexcept { return terms_; }

    /// out = Lambda alpha (overwritten)
    void apply(std::span<const double> alpha, std::span<double> out) const;
    Vector apply(std::span<const double> alpha) const;
    Vector diagonal() const;

private:
    PenaltyKind kind_;
    std::size_t dimension_;
    std::vector<PenaltyTerm> terms_;
};

/// Per-dimension dimensions J_p for a list of bases.
std::vector<std::size_t> basis_dimensions(std::span<const UnivariateBasis> bases);

PenaltyOperator build_difference_penalty(std::span<const std::size_t> dims,
                                         std::span<const int> orders);
PenaltyOperator build_difference_penalty(std::span<const UnivariateBasis> bases,
                                         std::span<const int> orders);
PenaltyOperator build_curvature_penalty(std::span<const UnivariateBasis> bases);

inline Vector apply_penalty(const PenaltyOperator& penalty, std::span<const double> alpha) {
    return penalty.apply(alpha);
}

/// alpha^T Lambda alpha
double penalty_quadratic_form(const PenaltyOperator& penalty, std::span<const double> alpha);

}  // namespace tensorsmooth
