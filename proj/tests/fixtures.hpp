#pragma once

// Fixtures shared by the unit tests and the acceptance runner.

#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "tensorsmooth/basis.hpp"
#include "tensorsmooth/penalty.hpp"
#include "tensorsmooth/tensor_ops.hpp"

namespace fixtures {

// x uniform on [0,1], coefficients sampled from a sine at the Greville points
struct SineFixture {
    tensorsmooth::UnivariateBasis basis;
    std::optional<tensorsmooth::TensorDesign> design;
    tensorsmooth::PenaltyOperator pen;
    std::vector<double> y;
};

inline SineFixture sine_fixture() {
    using namespace tensorsmooth;
    const std::size_t n = 200;
    auto basis = build_basis(0.0, 1.0, 16, 3);
    if (basis.dimension() != 20) throw std::logic_error("sine fixture expects J = 20");
    std::mt19937_64 g(2024);
    std::uniform_real_distribution<double> u;
    std::normal_distribution<double> e(0.0, 0.2);
    std::vector<double> x(n);
    for (auto& v : x) v = u(g);
    std::vector<double> alpha0(20);
    const auto& t = basis.extended_knots();
    for (std::size_t j = 0; j < 20; ++j) alpha0[j] = std::sin(2 * M_PI * (t[j + 1] + t[j + 2] + t[j + 3]) / 3.0);
    std::vector<BasisMatrix> f{BasisMatrix::from_basis(basis, x)};
    TensorDesign design(std::move(f));
    auto y = apply_phi(design, alpha0);
    for (auto& v : y) v += e(g);
    const std::size_t dims[] = {20};
    const int orders[] = {2};
    SineFixture s{basis, std::nullopt, build_difference_penalty(dims, orders), y};
    s.design.emplace(std::move(design));
    return s;
}

}  // namespace fixtures
