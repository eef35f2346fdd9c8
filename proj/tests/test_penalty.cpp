#include "doctest.h"

#include <cmath>
#include <array>
#include <map>
#include <optional>

#include "oracle/dense_oracle.hpp"
#include "tensorsmooth/errors.hpp"
#include "tensorsmooth/penalty.hpp"
#include "test_util.hpp"

using namespace tensorsmooth;
using oracle::MatrixXd;
using oracle::VectorXd;

namespace {

std::vector<UnivariateBasis> random_bases(testutil::Rng& rng, const std::vector<std::size_t>& J, int min_q) {
    std::vector<UnivariateBasis> out;
    for (std::size_t j : J) {
        const int max_q = std::min<int>(3, static_cast<int>(j) - 1);
        out.push_back(testutil::random_basis(rng, j, rng.integer(std::min(min_q, max_q), max_q)));
    }
    return out;
}

MatrixXd dense_curvature(const std::vector<UnivariateBasis>& bases) {
    std::vector<std::vector<MatrixXd>> grams;
    for (const auto& b : bases) {
        std::vector<MatrixXd> g;
        for (int k = 0; k <= 2; ++k) g.push_back(oracle::to_eigen(derivative_gram(b, k)));
        grams.push_back(g);
    }
    return oracle::curvature_penalty(grams);
}

std::vector<double> greville(const UnivariateBasis& b) {
    const auto& t = b.extended_knots();
    const int q = b.degree();
    std::vector<double> g(b.dimension());
    for (std::size_t j = 0; j < g.size(); ++j) {
        double s = 0.0;
        for (int r = 1; r <= q; ++r) s += t[j + static_cast<std::size_t>(r)];
        g[j] = s / q;
    }
    return g;
}

}  // namespace

TEST_CASE("univariate difference penalty is D^T D") {
    for (std::size_t J = 2; J < 8; ++J)
        for (int r = 1; r < static_cast<int>(J); ++r) {
            const std::size_t dims[] = {J};
            const int orders[] = {r};
            const auto pen = build_difference_penalty(dims, orders);
            CHECK(pen.terms().size() == 1);
            const MatrixXd D = oracle::difference(J, r);
            CHECK((oracle::penalty_matrix(pen) - D.transpose() * D).cwiseAbs().maxCoeff() == 0.0);
            // polynomial coefficient sequences of degree < r are annihilated exactly
            for (int deg = 0; deg < r; ++deg) {
                std::vector<double> a(J);
                for (std::size_t j = 0; j < J; ++j) a[j] = std::pow(static_cast<double>(j), deg);
                for (double v : pen.apply(a)) CHECK(v == 0.0);
            }
        }
}

TEST_CASE("difference penalty P=2 J=(4,3) r=(2,1)") {
    const std::size_t dims[] = {4, 3};
    const int orders[] = {2, 1};
    const auto pen = build_difference_penalty(dims, orders);
    REQUIRE(pen.terms().size() == 2);
    CHECK(pen.dimension() == 12);
    const MatrixXd ref = oracle::difference_penalty({4, 3}, {2, 1});
    testutil::Rng rng(31);
    const auto a = rng.vector(12);
    CHECK(testutil::rel_diff(pen.apply(a), oracle::to_std(ref * oracle::to_eigen(a))) <= 1e-12);
    CHECK(pen.apply(std::vector<double>(12, 1.0)) == std::vector<double>(12, 0.0));
    CHECK(penalty_quadratic_form(pen, std::vector<double>(12, 1.0)) == 0.0);
    CHECK(penalty_quadratic_form(pen, std::vector<double>(12, 0.0)) == 0.0);
    CHECK_THROWS_AS(pen.apply(std::vector<double>(11)), DimensionError);
}

TEST_CASE("difference order must stay below J") {
    const std::size_t dims[] = {4, 3};
    const int bad[] = {2, 3};
    CHECK_THROWS_AS(build_difference_penalty(dims, bad), OrderTooHighError);
    const int short_orders[] = {2};
    CHECK_THROWS_AS(build_difference_penalty(dims, short_orders), DimensionError);
}

TEST_CASE("curvature penalty structure") {
    testutil::Rng rng(32);
    SUBCASE("P=1 is the order-2 gram") {
        const auto b = testutil::random_basis(rng, 7, 3);
        const std::vector<UnivariateBasis> bases{b};
        const auto pen = build_curvature_penalty(bases);
        REQUIRE(pen.terms().size() == 1);
        CHECK(pen.terms()[0].weight == 1.0);
        const MatrixXd G = oracle::to_eigen(derivative_gram(b, 2));
        CHECK((oracle::penalty_matrix(pen) - G).cwiseAbs().maxCoeff() <= 1e-14 * G.cwiseAbs().maxCoeff());
    }
    SUBCASE("P=2 has weights 1, 2, 1") {
        const auto bases = random_bases(rng, {5, 4}, 2);
        const auto pen = build_curvature_penalty(bases);
        REQUIRE(pen.terms().size() == 3);
        std::map<std::vector<int>, double> w;
        for (const auto& t : pen.terms()) w[t.orders] = t.weight;
        CHECK(w.at({2, 0}) == 1.0);
        CHECK(w.at({1, 1}) == 2.0);
        CHECK(w.at({0, 2}) == 1.0);
    }
    SUBCASE("term count is P(P+1)/2") {
        for (std::size_t P = 1; P <= 4; ++P) {
            const auto bases = random_bases(rng, std::vector<std::size_t>(P, 3), 2);
            CHECK(build_curvature_penalty(bases).terms().size() == P * (P + 1) / 2);
        }
    }
    SUBCASE("degree below 2 is rejected") {
        const std::vector<UnivariateBasis> bases{build_basis(0, 1, 3, 3), build_basis(0, 1, 3, 1)};
        CHECK_THROWS_AS(build_curvature_penalty(bases), InvalidArgument);
    }
}

TEST_CASE("curvature penalty vanishes on affine functions") {
    testutil::Rng rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t P = static_cast<std::size_t>(rng.integer(1, 3));
        std::vector<std::size_t> J(P);
        for (auto& j : J) j = static_cast<std::size_t>(rng.integer(3, 6));
        const auto bases = random_bases(rng, J, 2);
        const auto pen = build_curvature_penalty(bases);
        std::vector<double> c(P + 1);
        for (auto& v : c) v = rng.uniform(-2, 2);
        std::vector<std::vector<double>> g;
        for (const auto& b : bases) g.push_back(greville(b));
        std::vector<double> a(pen.dimension());
        for (std::size_t k = 0; k < a.size(); ++k) {
            std::size_t rem = k;
            double v = c[0];
            for (std::size_t p = P; p-- > 0;) {
                v += c[p + 1] * g[p][rem % J[p]];
                rem /= J[p];
            }
            a[k] = v;
        }
        CHECK(std::abs(penalty_quadratic_form(pen, a)) <= 1e-10 * dot(a, a));
    }
}

TEST_CASE("penalties match dense assembly on random instances") {
    testutil::Rng rng(34);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t P = static_cast<std::size_t>(rng.integer(1, 3));
        const bool curvature = trial % 2 == 1;
        std::vector<std::size_t> J(P);
        for (auto& j : J) j = static_cast<std::size_t>(rng.integer(curvature ? 3 : 2, 5));
        const auto bases = random_bases(rng, J, curvature ? 2 : 0);
        MatrixXd ref;
        std::optional<PenaltyOperator> pen;
        if (curvature) {
            pen.emplace(build_curvature_penalty(bases));
            ref = dense_curvature(bases);
        } else {
            std::vector<int> orders;
            for (auto j : J) orders.push_back(rng.integer(1, static_cast<int>(j) - 1));
            pen.emplace(build_difference_penalty(bases, orders));
            ref = oracle::difference_penalty(J, orders);
        }
        const std::size_t K = pen->dimension();
        const auto a = rng.vector(K), b = rng.vector(K);
        CHECK(testutil::rel_diff(pen->apply(a), oracle::to_std(ref * oracle::to_eigen(a))) <= 1e-10);
        CHECK(testutil::rel_diff(pen->diagonal(), oracle::to_std(ref.diagonal())) <= 1e-12);
        const double qa = penalty_quadratic_form(*pen, a);
        CHECK(std::abs(qa - oracle::to_eigen(a).dot(ref * oracle::to_eigen(a))) <= 1e-10 * std::max(1.0, std::abs(qa)));
        // symmetry, semidefiniteness, linearity
        const double uv = dot(pen->apply(a), b), vu = dot(a, pen->apply(b));
        CHECK(std::abs(uv - vu) <= 1e-10 * std::max(1.0, std::abs(uv)));
        CHECK(qa >= -1e-10 * dot(a, a));
        const double s = rng.uniform(-3, 3);
        std::vector<double> comb(K);
        for (std::size_t k = 0; k < K; ++k) comb[k] = s * a[k] + b[k];
        const auto lhs = pen->apply(comb);
        const auto pa = pen->apply(a), pb = pen->apply(b);
        for (std::size_t k = 0; k < K; ++k) CHECK(std::abs(lhs[k] - (s * pa[k] + pb[k])) <= 1e-12 * (1.0 + std::abs(lhs[k])));
        CHECK(pen->apply(std::vector<double>(K, 0.0)) == std::vector<double>(K, 0.0));
    }
}

TEST_CASE("curvature penalty equals the integrated squared second partials") {
    const auto bx = build_basis(0.0, 1.0, 2, 3), by = build_basis(0.0, 1.0, 2, 3);
    const std::vector<UnivariateBasis> bases{bx, by};
    const auto pen = build_curvature_penalty(bases);
    testutil::Rng rng(35);
    const auto a = rng.vector(36);

    // grid aligned with the knots at 1/3 and 2/3
    const int N = 1800;
    const auto tx = oracle::clamped_knots(bx.breakpoints(), 3);
    std::vector<std::array<std::array<double, 6>, 3>> rows(N + 1);
    for (int i = 0; i <= N; ++i) {
        double x = static_cast<double>(i) / N;
        // one-sided values at the knots
        x = std::clamp(x, 1e-13, 1.0 - 1e-13);
        for (int k = 0; k <= 2; ++k)
            for (std::size_t j = 0; j < 6; ++j) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)][j] = oracle::cox_de_boor_deriv(tx, j, 3, k, x);
    }
    // composite Simpson; panels never straddle a knot
    double integral = 0.0;
    const double h = 1.0 / N;
    auto simpson = [&](int i) { return (i == 0 || i == N) ? h / 3 : (i % 2 ? 4 * h / 3 : 2 * h / 3); };
    for (int i = 0; i <= N; ++i) {
        const double wi = simpson(i);
        for (int l = 0; l <= N; ++l) {
            const double wl = simpson(l);
            double sxx = 0, sxy = 0, syy = 0;
            const auto& X = rows[static_cast<std::size_t>(i)];
            const auto& Y = rows[static_cast<std::size_t>(l)];
            for (std::size_t j = 0; j < 6; ++j)
                for (std::size_t k = 0; k < 6; ++k) {
                    const double c = a[j * 6 + k];
                    sxx += c * X[2][j] * Y[0][k];
                    sxy += c * X[1][j] * Y[1][k];
                    syy += c * X[0][j] * Y[2][k];
                }
            integral += wi * wl * (sxx * sxx + 2 * sxy * sxy + syy * syy);
        }
    }
    const double q = penalty_quadratic_form(pen, a);
    CHECK(std::abs(q - integral) <= 1e-6 * std::abs(integral));
}
