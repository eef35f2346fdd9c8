#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "oracle/dense_oracle.hpp"
#include "tensorsmooth/basis.hpp"
#include "tensorsmooth/errors.hpp"
#include "test_util.hpp"

using namespace tensorsmooth;

TEST_CASE("dimension is interior knots plus degree plus one") {
    CHECK(build_basis(0.0, 1.0, 10, 3).dimension() == 14);
    CHECK(build_basis(0.0, 1.0, 36, 3).dimension() == 40);
    const std::size_t J = build_basis(0.0, 1.0, 36, 3).dimension();
    CHECK(J * J * J == 64000);

    const auto b = build_basis(0.0, 2.0, 1, 0);
    CHECK(b.dimension() == 2);
    CHECK(b.breakpoints() == std::vector<double>{0.0, 1.0, 2.0});
    for (int m = 0; m < 6; ++m)
        for (int q = 0; q < 5; ++q) CHECK(build_basis(-1.0, 3.0, m, q).dimension() == static_cast<std::size_t>(m + q + 1));
}

TEST_CASE("extended knots repeat the boundary") {
    const auto b = build_basis(0.0, 1.0, 3, 2);
    const auto& t = b.extended_knots();
    REQUIRE(t.size() == b.dimension() + 3);
    CHECK(t[0] == 0.0);
    CHECK(t[1] == 0.0);
    CHECK(t[2] == 0.0);
    CHECK(t[t.size() - 1] == 1.0);
    CHECK(t[t.size() - 3] == 1.0);
    CHECK(t[3] == doctest::Approx(0.25));
}

TEST_CASE("degree zero indicator") {
    const auto b = build_basis(0.0, 2.0, 1, 0);
    CHECK(b.eval_row(0.5) == std::vector<double>{1.0, 0.0});
    CHECK(b.eval_row(1.5) == std::vector<double>{0.0, 1.0});
    CHECK(b.eval_row(2.0) == std::vector<double>{0.0, 1.0});
}

TEST_CASE("cubic basis matches the recursive definition") {
    const auto b = build_basis(0.0, 1.0, 10, 3);
    const auto t = oracle::clamped_knots(b.breakpoints(), 3);
    CHECK(t == b.extended_knots());
    const auto row = b.eval_row(0.37);
    for (std::size_t j = 0; j < b.dimension(); ++j) CHECK(row[j] == doctest::Approx(oracle::cox_de_boor(t, j, 3, 0.37)).epsilon(1e-13));
}

TEST_CASE("values and derivatives match the recursion on random knots") {
    testutil::Rng rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const int q = rng.integer(0, 4);
        const std::size_t J = static_cast<std::size_t>(q + 1 + rng.integer(0, 6));
        const auto b = testutil::random_basis(rng, J, q, -2.0, 3.0);
        const auto t = oracle::clamped_knots(b.breakpoints(), q);
        for (int s = 0; s < 20; ++s) {
            double x = rng.uniform(-2.0, 3.0);
            if (s == 0) x = -2.0;
            if (s == 1) x = 3.0;
            for (int k = 0; k <= q; ++k) {
                const auto row = b.eval_row(x, k);
                double scale = 0.0;
                std::vector<double> ref(J);
                for (std::size_t j = 0; j < J; ++j) {
                    // right end of the domain uses the left-sided derivative
                    const double xe = (x == 3.0 && k > 0) ? 3.0 - 1e-13 : x;
                    ref[j] = oracle::cox_de_boor_deriv(t, j, q, k, xe);
                    scale = std::max(scale, std::abs(ref[j]));
                }
                for (std::size_t j = 0; j < J; ++j) CHECK(std::abs(row[j] - ref[j]) <= 1e-9 * std::max(1.0, scale));
            }
        }
    }
}

TEST_CASE("partition of unity and local support") {
    testutil::Rng rng(12);
    for (int q = 0; q <= 4; ++q) {
        const auto b = testutil::random_basis(rng, static_cast<std::size_t>(q + 9), q);
        for (int s = 0; s < 1000; ++s) {
            const double x = rng.uniform();
            const auto row = b.eval_row(x);
            CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-12);
            std::size_t first = row.size(), last = 0, count = 0;
            for (std::size_t j = 0; j < row.size(); ++j) {
                CHECK(row[j] >= 0.0);
                if (row[j] != 0.0) {
                    first = std::min(first, j);
                    last = j;
                    ++count;
                }
            }
            CHECK(count <= static_cast<std::size_t>(q + 1));
            CHECK(last - first <= static_cast<std::size_t>(q));

            std::vector<double> nz(static_cast<std::size_t>(q + 1));
            const std::size_t f = b.eval_nonzero(x, 0, nz);
            for (std::size_t j = 0; j < row.size(); ++j) {
                const double v = (j >= f && j <= f + static_cast<std::size_t>(q)) ? nz[j - f] : 0.0;
                CHECK(v == row[j]);
            }
        }
    }
}

TEST_CASE("first derivative matches central differences") {
    testutil::Rng rng(13);
    for (int q = 1; q <= 4; ++q) {
        const auto b = testutil::random_basis(rng, static_cast<std::size_t>(q + 6), q);
        const auto& br = b.breakpoints();
        for (int s = 0; s < 200; ++s) {
            const double x = rng.uniform(0.01, 0.99);
            const double h = 1e-6;
            bool near_knot = false;
            for (double k : br) near_knot = near_knot || std::abs(x - k) < 2 * h;
            if (near_knot) continue;
            const auto d = b.eval_row(x, 1);
            const auto hi = b.eval_row(x + h), lo = b.eval_row(x - h);
            for (std::size_t j = 0; j < d.size(); ++j) CHECK(std::abs(d[j] - (hi[j] - lo[j]) / (2 * h)) <= 1e-6 * std::max(1.0, std::abs(d[j])));
        }
    }
}

TEST_CASE("evaluation errors") {
    const auto b = build_basis(0.0, 1.0, 4, 2);
    CHECK_THROWS_AS(b.eval_row(-1e-9), DomainError);
    CHECK_THROWS_AS(b.eval_row(1.0 + 1e-9), DomainError);
    CHECK_THROWS_AS(b.eval_row(0.5, 3), InvalidArgument);
    CHECK_THROWS_AS(UnivariateBasis({0.0, 0.5, 0.5, 1.0}, 3), DuplicateKnotError);
    CHECK_THROWS_AS(UnivariateBasis({0.0, 0.7, 0.5, 1.0}, 3), DuplicateKnotError);
    CHECK_THROWS_AS(build_basis(1.0, 1.0, 3, 3), InvalidArgument);
    CHECK_THROWS_AS(build_basis(0.0, 1.0, -1, 3), InvalidArgument);
    CHECK_THROWS_AS(build_basis(0.0, 1.0, 3, -1), InvalidArgument);
}

TEST_CASE("quantile placement") {
    std::vector<double> x;
    for (int i = 0; i < 1000; ++i) x.push_back(std::pow(i / 999.0, 3));
    const auto b = build_basis(0.0, 1.0, 3, 3, KnotPlacement::quantile, x);
    const auto& br = b.breakpoints();
    REQUIRE(br.size() == 5);
    CHECK(br[2] == doctest::Approx(0.125).epsilon(1e-3));
    CHECK_THROWS_AS(build_basis(0.0, 1.0, 3, 3, KnotPlacement::quantile, {}), InvalidArgument);
    CHECK_THROWS_AS(build_basis(0.0, 1.0, 3, 3, KnotPlacement::quantile, std::vector<double>{2.0}), DomainError);

    // heavy ties get nudged apart
    std::vector<double> ties(100, 0.5);
    ties.push_back(0.0);
    ties.push_back(1.0);
    const auto t = build_basis(0.0, 1.0, 4, 3, KnotPlacement::quantile, ties);
    for (std::size_t i = 1; i < t.breakpoints().size(); ++i) CHECK(t.breakpoints()[i] > t.breakpoints()[i - 1]);
    // ties at the upper bound leave no room
    std::vector<double> top(100, 1.0);
    CHECK_THROWS_AS(build_basis(0.0, 1.0, 4, 3, KnotPlacement::quantile, top), DuplicateKnotError);
}

TEST_CASE("difference matrix stencils") {
    const auto d1 = difference_matrix(4, 1);
    REQUIRE(d1.rows() == 3);
    REQUIRE(d1.cols() == 4);
    const double e1[3][4] = {{-1, 1, 0, 0}, {0, -1, 1, 0}, {0, 0, -1, 1}};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(d1(i, j) == e1[i][j]);
    const auto d2 = difference_matrix(4, 2);
    const double e2[2][4] = {{1, -2, 1, 0}, {0, 1, -2, 1}};
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(d2(i, j) == e2[i][j]);

    CHECK_THROWS_AS(difference_matrix(4, 4), OrderTooHighError);
    CHECK_THROWS_AS(difference_matrix(4, 0), InvalidArgument);

    for (std::size_t J = 2; J < 9; ++J)
        for (int r = 1; r < static_cast<int>(J); ++r) {
            const auto D = difference_matrix(J, r);
            const auto ref = oracle::difference(J, r);
            for (std::size_t i = 0; i < D.rows(); ++i)
                for (std::size_t j = 0; j < J; ++j) CHECK(D(i, j) == ref(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            // annihilates polynomial samples of degree < r
            for (int deg = 0; deg < r; ++deg) {
                for (std::size_t i = 0; i < D.rows(); ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < J; ++j) s += D(i, j) * std::pow(static_cast<double>(j), deg);
                    CHECK(s == 0.0);
                }
            }
        }
}

TEST_CASE("gauss legendre integrates degree 2n-1 exactly") {
    for (std::size_t n = 1; n <= 8; ++n) {
        std::vector<double> x, w;
        gauss_legendre(n, x, w);
        REQUIRE(x.size() == n);
        for (std::size_t d = 0; d < 2 * n; ++d) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += w[i] * std::pow(x[i], static_cast<double>(d));
            const double exact = d % 2 ? 0.0 : 2.0 / static_cast<double>(d + 1);
            CHECK(s == doctest::Approx(exact).epsilon(1e-14).scale(1.0));
        }
    }
}

TEST_CASE("derivative gram properties") {
    testutil::Rng rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        const int q = rng.integer(0, 4);
        const std::size_t J = static_cast<std::size_t>(q + 1 + rng.integer(0, 15));
        const double a = rng.uniform(-2, 0), b = rng.uniform(1, 3);
        const auto basis = testutil::random_basis(rng, J, q, a, b);
        for (int k = 0; k <= q; ++k) {
            const auto G = derivative_gram(basis, k);
            const Eigen::MatrixXd E = oracle::to_eigen(G);
            CHECK((E - E.transpose()).cwiseAbs().maxCoeff() == 0.0);
            const double minev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(E).eigenvalues().minCoeff();
            CHECK(minev >= -1e-10 * std::max(1.0, E.cwiseAbs().maxCoeff()));
            if (k == 0) CHECK(E.sum() == doctest::Approx(b - a).epsilon(1e-12));
            // constants have coefficient vector 1, linear functions the Greville abscissae
            const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(J));
            Eigen::VectorXd grev(static_cast<Eigen::Index>(J));
            const auto& t = basis.extended_knots();
            for (std::size_t j = 0; j < J; ++j) {
                double s = 0.0;
                for (int r = 1; r <= q; ++r) s += t[j + static_cast<std::size_t>(r)];
                grev(static_cast<Eigen::Index>(j)) = q > 0 ? s / q : 0.0;
            }
            const double scale = std::max(1.0, E.cwiseAbs().maxCoeff());
            if (k >= 1) CHECK(std::abs(ones.dot(E * ones)) <= 1e-10 * scale);
            if (k >= 2) CHECK(std::abs(grev.dot(E * grev)) <= 1e-9 * scale * grev.squaredNorm());
        }
        CHECK_THROWS_AS(derivative_gram(basis, q + 1), InvalidArgument);
    }
}

TEST_CASE("second derivative gram matches trapezoid integration") {
    const auto basis = build_basis(0.0, 1.0, 8, 3);
    const auto E = oracle::to_eigen(derivative_gram(basis, 2));
    // 9 intervals of about 11112 points = 10^5 points
    const auto ref = oracle::trapezoid_gram(basis.breakpoints(), 3, 2, 11112);
    CHECK((E - ref).cwiseAbs().maxCoeff() <= 1e-8 * ref.cwiseAbs().maxCoeff());

    testutil::Rng rng(15);
    const auto nb = testutil::random_basis(rng, 9, 2, -1.0, 2.0);
    for (int k = 0; k <= 2; ++k) {
        const auto G = oracle::to_eigen(derivative_gram(nb, k));
        const auto R = oracle::trapezoid_gram(nb.breakpoints(), 2, k, 4000);
        CHECK((G - R).cwiseAbs().maxCoeff() <= 1e-6 * R.cwiseAbs().maxCoeff());
    }
}
