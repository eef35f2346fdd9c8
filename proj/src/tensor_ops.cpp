#include "tensorsmooth/tensor_ops.hpp"

#include <algorithm>
#include <string>

#include "tensorsmooth/errors.hpp"
#include "tensorsmooth/parallel.hpp"

namespace tensorsmooth {

BasisMatrix BasisMatrix::from_basis(const UnivariateBasis& basis, std::span<const double> x,
                                    int deriv) {
    BasisMatrix m;
    m.cols_ = basis.dimension();
    m.width_ = static_cast<std::size_t>(basis.degree() + 1);
    m.first_.resize(x.size());
    m.values_.resize(x.size() * m.width_);
    for (std::size_t i = 0; i < x.size(); ++i)
        m.first_[i] = basis.eval_nonzero(
            x[i], deriv, std::span<double>(m.values_.data() + i * m.width_, m.width_));
    return m;
}

BasisMatrix BasisMatrix::from_dense(std::size_t rows, std::size_t cols,
                                    std::span<const double> row_major) {
    if (row_major.size() != rows * cols)
        throw DimensionError("BasisMatrix::from_dense: expected " + std::to_string(rows * cols) +
                             " values, got " + std::to_string(row_major.size()));
    if (cols == 0) throw DimensionError("BasisMatrix::from_dense: zero columns");
    BasisMatrix m;
    m.cols_ = cols;
    m.width_ = cols;
    m.first_.assign(rows, 0);
    m.values_.assign(row_major.begin(), row_major.end());
    return m;
}

double BasisMatrix::operator()(std::size_t i, std::size_t j) const {
    const std::size_t f = first_.at(i);
    if (j < f || j >= f + width_) return 0.0;
    return values_[i * width_ + (j - f)];
}

TensorDesign::TensorDesign(std::vector<BasisMatrix> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw DimensionError("TensorDesign needs at least one factor");
    rows_ = factors_.front().rows();
    for (const auto& f : factors_)
        if (f.rows() != rows_) throw DimensionError("TensorDesign factors must share the row count");

    const std::size_t P = factors_.size();
    strides_.assign(P, 1);
    for (std::size_t p = P - 1; p > 0; --p) strides_[p - 1] = strides_[p] * factors_[p].cols();
    dimension_ = strides_[0] * factors_[0].cols();

    pattern_.assign(1, 0);
    for (std::size_t p = 0; p < P; ++p) {
        const std::size_t w = factors_[p].width();
        std::vector<std::size_t> next(pattern_.size() * w);
        for (std::size_t a = 0; a < pattern_.size(); ++a)
            for (std::size_t t = 0; t < w; ++t) next[a * w + t] = pattern_[a] + t * strides_[p];
        pattern_ = std::move(next);
    }
}

std::size_t TensorDesign::expand_row(std::size_t i, std::span<double> values) const {
    std::size_t origin = 0;
    std::size_t count = 1;
    values[0] = 1.0;
    for (std::size_t p = 0; p < factors_.size(); ++p) {
        const BasisMatrix& f = factors_[p];
        const auto band = f.band(i);
        const std::size_t w = band.size();
        origin += f.first(i) * strides_[p];
        // incremental outer product, back to front so it can run in place
        for (std::size_t a = count; a-- > 0;) {
            const double head = values[a];
            for (std::size_t t = w; t-- > 0;) values[a * w + t] = head * band[t];
        }
        count *= w;
    }
    return origin;
}

void apply_phi_t(const TensorDesign& design, std::span<const double> y, std::span<double> out) {
    if (y.size() != design.rows())
        throw DimensionError("apply_phi_t: y has length " + std::to_string(y.size()) +
                             ", design has " + std::to_string(design.rows()) + " rows");
    if (out.size() != design.dimension()) throw DimensionError("apply_phi_t: output length != K");

    const std::size_t n = design.rows();
    const std::size_t K = design.dimension();
    const std::size_t W = design.row_nonzeros();
    const auto& pattern = design.pattern();
    const std::size_t chunks = chunk_count(n);
    std::vector<Vector> partial(chunks > 1 ? chunks - 1 : 0);

    parallel_chunks(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
        std::span<double> acc = out;
        if (c > 0) {
            partial[c - 1].assign(K, 0.0);
            acc = partial[c - 1];
        } else {
            std::fill(out.begin(), out.end(), 0.0);
        }
        Vector values(W);
        for (std::size_t i = begin; i < end; ++i) {
            const double yi = y[i];
            if (yi == 0.0) continue;
            const std::size_t origin = design.expand_row(i, values);
            double* base = acc.data() + origin;
            for (std::size_t a = 0; a < W; ++a) base[pattern[a]] += yi * values[a];
        }
    });
    // fixed reduction order
    for (const auto& part : partial)
        for (std::size_t k = 0; k < K; ++k) out[k] += part[k];
}

Vector apply_phi_t(const TensorDesign& design, std::span<const double> y) {
    Vector out(design.dimension());
    apply_phi_t(design, y, out);
    return out;
}

void apply_phi(const TensorDesign& design, std::span<const double> alpha, std::span<double> out) {
    if (alpha.size() != design.dimension())
        throw DimensionError("apply_phi: alpha has length " + std::to_string(alpha.size()) +
                             ", K = " + std::to_string(design.dimension()));
    if (out.size() != design.rows()) throw DimensionError("apply_phi: output length != n");

    const std::size_t W = design.row_nonzeros();
    const auto& pattern = design.pattern();
    parallel_chunks(design.rows(), [&](std::size_t, std::size_t begin, std::size_t end) {
        Vector values(W);
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t origin = design.expand_row(i, values);
            const double* base = alpha.data() + origin;
            double s = 0.0;
            for (std::size_t a = 0; a < W; ++a) s += values[a] * base[pattern[a]];
            out[i] = s;
        }
    });
}

Vector apply_phi(const TensorDesign& design, std::span<const double> alpha) {
    Vector out(design.rows());
    apply_phi(design, alpha, out);
    return out;
}

Vector phi_t_phi_diagonal(const TensorDesign& design, std::span<const double> weights) {
    if (!weights.empty() && weights.size() != design.rows())
        throw DimensionError("phi_t_phi_diagonal: weight length != n");
    const std::size_t W = design.row_nonzeros();
    const auto& pattern = design.pattern();
    Vector diag(design.dimension(), 0.0);
    Vector values(W);
    for (std::size_t i = 0; i < design.rows(); ++i) {
        const double wi = weights.empty() ? 1.0 : weights[i];
        const std::size_t origin = design.expand_row(i, values);
        double* base = diag.data() + origin;
        for (std::size_t a = 0; a < W; ++a) base[pattern[a]] += wi * values[a] * values[a];
    }
    return diag;
}

NormalFactor::NormalFactor(std::size_t left, DenseMatrix core, std::size_t right)
    : left_(left), core_(std::move(core)), right_(right) {
    if (core_.rows() != core_.cols()) throw DimensionError("normal factor core must be square");
    if (left_ == 0 || right_ == 0 || core_.rows() == 0)
        throw DimensionError("normal factor dimensions must be positive");
    const std::size_t J = core_.rows();
    band_begin_.assign(J, 0);
    band_end_.assign(J, 0);
    for (std::size_t t = 0; t < J; ++t) {
        std::size_t b = J, e = 0;
        for (std::size_t j = 0; j < J; ++j)
            if (core_(t, j) != 0.0) {
                b = std::min(b, j);
                e = j + 1;
            }
        band_begin_[t] = b == J ? 0 : b;
        band_end_[t] = e;
    }
}

void NormalFactor::apply_in_place(std::span<double> alpha) const {
    if (alpha.size() != dimension())
        throw DimensionError("normal factor apply: vector length " + std::to_string(alpha.size()) +
                             " != L*J*R = " + std::to_string(dimension()));
    const std::size_t J = core_.rows();
    const std::size_t R = right_;
    Vector z_in(J), z_out(J);
    std::size_t base = 0;
    for (std::size_t l = 0; l < left_; ++l) {
        for (std::size_t r = 0; r < R; ++r) {
            std::size_t index = base + r;
            for (std::size_t j = 0; j < J; ++j, index += R) z_in[j] = alpha[index];
            for (std::size_t t = 0; t < J; ++t) {
                const auto row = core_.row(t);
                double s = 0.0;
                for (std::size_t j = band_begin_[t]; j < band_end_[t]; ++j) s += row[j] * z_in[j];
                z_out[t] = s;
            }
            index = base + r;
            for (std::size_t j = 0; j < J; ++j, index += R) alpha[index] = z_out[j];
        }
        base += R * J;
    }
}

Vector NormalFactor::diagonal() const {
    const std::size_t J = core_.rows();
    Vector d(dimension());
    std::size_t k = 0;
    for (std::size_t l = 0; l < left_; ++l)
        for (std::size_t j = 0; j < J; ++j) {
            const double a = core_(j, j);
            for (std::size_t r = 0; r < right_; ++r) d[k++] = a;
        }
    return d;
}

Vector apply_normal_factor(const NormalFactor& factor, std::span<const double> alpha) {
    Vector out(alpha.begin(), alpha.end());
    factor.apply_in_place(out);
    return out;
}

void apply_normal_factor_chain_in_place(std::span<const NormalFactor> chain, std::span<double> alpha) {
    for (const auto& f : chain)
        if (f.dimension() != alpha.size())
            throw DimensionError("normal factor chain: factor dimension " +
                                 std::to_string(f.dimension()) + " != vector length " +
                                 std::to_string(alpha.size()));
    for (std::size_t p = chain.size(); p-- > 0;) chain[p].apply_in_place(alpha);
}

Vector apply_normal_factor_chain(std::span<const NormalFactor> chain, std::span<const double> alpha) {
    Vector out(alpha.begin(), alpha.end());
    apply_normal_factor_chain_in_place(chain, out);
    return out;
}

}  // namespace tensorsmooth
