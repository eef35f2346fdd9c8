#include "tensorsmooth/diagnostics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "tensorsmooth/errors.hpp"
#include "tensorsmooth/reml.hpp"

namespace tensorsmooth {

double dense_trace(const TensorDesign& design, const PenaltyOperator& penalty, double lambda,
                   std::span<const double> w2) {
    const std::size_t K = design.dimension();
    if (K > kDenseTraceLimit)
        throw ConfigError("dense trace check needs K <= " + std::to_string(kDenseTraceLimit) + ", got K = " +
                          std::to_string(K));
    if (penalty.dimension() != K) throw DimensionError("penalty dimension != design dimension");
    if (!w2.empty() && w2.size() != design.rows()) throw DimensionError("weight length != number of rows");

    const auto n = static_cast<Eigen::Index>(K);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    Vector values(design.row_nonzeros());
    const auto& pattern = design.pattern();
    for (std::size_t i = 0; i < design.rows(); ++i) {
        const std::size_t origin = design.expand_row(i, values);
        const double w = w2.empty() ? 1.0 : w2[i];
        for (std::size_t a = 0; a < values.size(); ++a)
            for (std::size_t b = 0; b < values.size(); ++b)
                gram(static_cast<Eigen::Index>(origin + pattern[a]), static_cast<Eigen::Index>(origin + pattern[b])) +=
                    w * values[a] * values[b];
    }
    Eigen::MatrixXd system = gram;
    Vector unit(K, 0.0), col(K);
    for (std::size_t k = 0; k < K; ++k) {
        unit[k] = 1.0;
        penalty.apply(unit, col);
        unit[k] = 0.0;
        for (std::size_t r = 0; r < K; ++r)
            system(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) += lambda * col[r];
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() != Eigen::Success)
        throw DegenerateFitError("dense trace check: system matrix is not positive definite");
    return llt.solve(gram).trace();
}

std::vector<TraceCheckRow> trace_convergence(const TensorDesign& design, const PenaltyOperator& penalty,
                                             double lambda, std::size_t max_probes, std::uint64_t seed,
                                             const CgConfig& cg) {
    if (max_probes < 1) throw ConfigError("trace check needs at least one probe vector");
    const double exact = dense_trace(design, penalty, lambda);
    const ProbeSet probes = ProbeSet::rademacher(max_probes, design.dimension(), seed);
    const TraceEstimate est = estimate_trace_correction(design, penalty, lambda, probes, cg);

    std::vector<TraceCheckRow> rows;
    double sum = 0.0;
    const double K = static_cast<double>(design.dimension());
    for (std::size_t m = 0; m < max_probes; ++m) {
        sum += est.quadratic_forms[m];
        TraceCheckRow row;
        row.probes = m + 1;
        row.estimate = K - sum / static_cast<double>(m + 1);
        row.exact = exact;
        row.relative_error = std::abs(row.estimate - exact) / std::abs(exact);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace tensorsmooth
