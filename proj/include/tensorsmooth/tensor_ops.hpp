#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tensorsmooth/basis.hpp"
#include "tensorsmooth/linalg.hpp"

namespace tensorsmooth {

/// One univariate factor Phi_p (n x J).  Each row stores a contiguous band of
/// `width` entries starting at column first(i); entries outside the band are
/// zero.  B-spline factors have width q+1; dense factors have width J.
class BasisMatrix {
public:
    BasisMatrix() = default;

    static BasisMatrix from_basis(const UnivariateBasis& basis, std::span<const double> x,
                                  int deriv = 0);
    /// Dense row-major n x J values.
    static BasisMatrix from_dense(std::size_t rows, std::size_t cols,
                                  std::span<const double> row_major);

    std::size_t rows() const noexcept { return first_.size(); }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t first(std::size_t i) const noexcept { return first_[i]; }
    std::span<const double> band(std::size_t i) const noexcept {
        return {values_.data() + i * width_, width_};
    }
    double operator()(std::size_t i, std::size_t j) const;

private:
    std::size_t cols_ = 0;
    std::size_t width_ = 0;
    std::vector<std::size_t> first_;
    std::vector<double> values_;
};

/// The P factors Phi_1 ... Phi_P standing in for the row-wise Kronecker
/// (Khatri-Rao) design Phi in R^{n x K}, K = prod J_p.
///
/// Flat coefficient index k corresponds to the multi-index (j_1, ..., j_P)
/// with j_P varying fastest: k = sum_p j_p * stride(p), stride(P) = 1.
class TensorDesign {
public:
    explicit TensorDesign(std::vector<BasisMatrix> factors);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t factor_count() const noexcept { return factors_.size(); }
    const BasisMatrix& factor(std::size_t p) const { return factors_.at(p); }
    const std::vector<BasisMatrix>& factors() const noexcept { return factors_; }
    std::size_t stride(std::size_t p) const { return strides_.at(p); }
    /// prod_p width_p: nonzeros per implicit design row
    std::size_t row_nonzeros() const noexcept { return pattern_.size(); }

    /// Expands row i into its nonzero Kronecker entries.  Returns the flat
    /// offset of the band origin; entry a sits at origin + pattern()[a].
    std::size_t expand_row(std::size_t i, std::span<double> values) const;
    const std::vector<std::size_t>& pattern() const noexcept { return pattern_; }

private:
    std::vector<BasisMatrix> factors_;
    std::vector<std::size_t> strides_;
    std::vector<std::size_t> pattern_;
    std::size_t rows_ = 0;
    std::size_t dimension_ = 1;
};

/// Phi^T y = sum_i y[i] v_i.  `out` (length K) is overwritten.
void apply_phi_t(const TensorDesign& design, std::span<const double> y, std::span<double> out);
Vector apply_phi_t(const TensorDesign& design, std::span<const double> y);

/// Phi alpha = (v_1^T alpha, ..., v_n^T alpha).  `out` (length n) is overwritten.
void apply_phi(const TensorDesign& design, std::span<const double> alpha, std::span<double> out);
Vector apply_phi(const TensorDesign& design, std::span<const double> alpha);

/// diag(Phi^T W Phi)[k] = sum_i w[i] v_i[k]^2; weights default to 1.
Vector phi_t_phi_diagonal(const TensorDesign& design, std::span<const double> weights = {});

/// I_L (x) A (x) I_R; only the J x J core is stored.
class NormalFactor {
public:
    NormalFactor(std::size_t left, DenseMatrix core, std::size_t right);

    std::size_t left() const noexcept { return left_; }
    std::size_t right() const noexcept { return right_; }
    std::size_t core_size() const noexcept { return core_.rows(); }
    std::size_t dimension() const noexcept { return left_ * core_.rows() * right_; }
    const DenseMatrix& core() const noexcept { return core_; }

    /// Overwrites alpha with (I_L (x) A (x) I_R) alpha using O(J) scratch.
    void apply_in_place(std::span<double> alpha) const;
    /// diag(I_L (x) A (x) I_R)
    Vector diagonal() const;

private:
    std::size_t left_;
    DenseMatrix core_;
    std::size_t right_;
    // column range [begin, end) of nonzeros per core row
    std::vector<std::size_t> band_begin_;
    std::vector<std::size_t> band_end_;
};

Vector apply_normal_factor(const NormalFactor& factor, std::span<const double> alpha);

/// w_P = alpha, w_{p-1} = F_p w_p for p = P..1; returns w_0.
void apply_normal_factor_chain_in_place(std::span<const NormalFactor> chain, std::span<double> alpha);
Vector apply_normal_factor_chain(std::span<const NormalFactor> chain, std::span<const double> alpha);

}  // namespace tensorsmooth
