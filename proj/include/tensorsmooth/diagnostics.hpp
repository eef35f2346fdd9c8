#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tensorsmooth/penalty.hpp"
#include "tensorsmooth/solver.hpp"
#include "tensorsmooth/tensor_ops.hpp"

namespace tensorsmooth {

/// Largest K for which the dense trace check assembles K x K matrices.
inline constexpr std::size_t kDenseTraceLimit = 5000;

/// trace((Phi^T W Phi + lambda Lambda)^{-1} Phi^T W Phi) from dense matrices
/// and a Cholesky factorization.  Throws ConfigError when K exceeds
/// kDenseTraceLimit.
double dense_trace(const TensorDesign& design, const PenaltyOperator& penalty, double lambda,
                   std::span<const double> w2 = {});

struct TraceCheckRow {
    std::size_t probes = 0;
    double estimate = 0.0;
    double exact = 0.0;
    double relative_error = 0.0;
};

/// Hutchinson estimate using the first M of max_probes seeded probes, for
/// M = 1..max_probes, against the dense trace.
std::vector<TraceCheckRow> trace_convergence(const TensorDesign& design, const PenaltyOperator& penalty,
                                             double lambda, std::size_t max_probes, std::uint64_t seed,
                                             const CgConfig& cg = {});

}  // namespace tensorsmooth
