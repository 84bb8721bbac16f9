#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "mmcpf/grid.hpp"
#include "test_support.hpp"

using namespace mmcpf;
using mmcpf::testing::random_cells;
using mmcpf::testing::random_edges;

namespace {

constexpr double pi = std::numbers::pi;

/// Relative error against the scale of the two inner products' factors.
double scaled_err(double a, double b, double scale) { return std::fabs(a - b) / scale; }

template <class L>
double hnorm(const GridField<L>& f) {
    return std::sqrt(f.geometry().cell_area() * dot(f, f));
}

}  // namespace

TEST(EdgeToCenter, ConstantsAverageToThemselvesAndDifferenceToZero) {
    const GridGeometry g(3.0, 2.0, 5, 4);
    const EdgeFieldEW f(g, 2.5);
    const EdgeFieldNS h(g, -1.25);
    EXPECT_EQ(norm_inf(dx(f)), 0.0);
    EXPECT_EQ(norm_inf(dy(h)), 0.0);
    const CellField af = ax(f), ah = ay(h);
    for (double v : af.values()) EXPECT_DOUBLE_EQ(v, 2.5);
    for (double v : ah.values()) EXPECT_DOUBLE_EQ(v, -1.25);
}

TEST(EdgeToCenter, DifferenceWrapsAroundThePeriodicRow) {
    // Unique east-west edges 1..4 along x, hx = 1; the edge west of cell 0 is edge 3.
    const GridGeometry g(4.0, 2.0, 4, 2);
    const EdgeFieldEW f = EdgeFieldEW::generate(g, [](int i, int) { return i + 1.0; });
    const CellField d = dx(f);
    for (int j = 0; j < 2; ++j) {
        EXPECT_DOUBLE_EQ(d(0, j), -3.0);
        EXPECT_DOUBLE_EQ(d(1, j), 1.0);
        EXPECT_DOUBLE_EQ(d(2, j), 1.0);
        EXPECT_DOUBLE_EQ(d(3, j), 1.0);
    }
    const CellField a = ax(f);
    EXPECT_DOUBLE_EQ(a(0, 0), 2.5);
    EXPECT_DOUBLE_EQ(a(2, 1), 2.5);
}

TEST(CenterToEdge, ConstantsAndStencil) {
    const GridGeometry g(2.0, 3.0, 4, 6);
    const CellField c(g, 0.7);
    EXPECT_EQ(norm_inf(Dx(c)), 0.0);
    EXPECT_EQ(norm_inf(Dy(c)), 0.0);
    const EdgeFieldEW ex = Ax(c);
    const EdgeFieldNS ey = Ay(c);
    for (double v : ex.values()) EXPECT_DOUBLE_EQ(v, 0.7);
    for (double v : ey.values()) EXPECT_DOUBLE_EQ(v, 0.7);

    const CellField phi = CellField::generate(g, [](int i, int j) { return i * i + 10.0 * j; });
    const EdgeFieldEW dxe = Dx(phi);
    EXPECT_DOUBLE_EQ(dxe(1, 2), (4.0 - 1.0) / g.hx());
    EXPECT_DOUBLE_EQ(dxe(3, 2), (0.0 - 9.0) / g.hx());  // wraps to cell 0
    const EdgeFieldNS dye = Dy(phi);
    EXPECT_DOUBLE_EQ(dye(2, 5), (0.0 - 50.0) / g.hy());
    EXPECT_DOUBLE_EQ(Ay(phi)(1, 0), 0.5 * (1.0 + 11.0));
}

namespace {

/// Periodic second-difference matrix in x, assembled entry by entry.
Eigen::MatrixXd second_difference_x(const GridGeometry& g) {
    const int size = g.m * g.n;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(size, size);
    const double c = 1.0 / (g.hx() * g.hx());
    for (int i = 0; i < g.m; ++i) {
        for (int j = 0; j < g.n; ++j) {
            const int row = i * g.n + j;
            A(row, row) += -2.0 * c;
            A(row, ((i + 1) % g.m) * g.n + j) += c;
            A(row, ((i + g.m - 1) % g.m) * g.n + j) += c;
        }
    }
    return A;
}

Eigen::MatrixXd second_difference_y(const GridGeometry& g) {
    const int size = g.m * g.n;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(size, size);
    const double c = 1.0 / (g.hy() * g.hy());
    for (int i = 0; i < g.m; ++i) {
        for (int j = 0; j < g.n; ++j) {
            const int row = i * g.n + j;
            A(row, row) += -2.0 * c;
            A(row, i * g.n + (j + 1) % g.n) += c;
            A(row, i * g.n + (j + g.n - 1) % g.n) += c;
        }
    }
    return A;
}

Eigen::VectorXd as_vector(const CellField& f) {
    return Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
}

}  // namespace

TEST(CenterToEdge, SecondDifferenceOfCosineMatchesEigenvalueAndDenseMatrix) {
    const GridGeometry g(5.0, 3.0, 8, 8);
    const CellField phi = CellField::generate(g, [&](int i, int) { return std::cos(2 * pi * g.x(i) / g.Lx); });
    const CellField second = dx(Dx(phi));
    const double lambda = -(4.0 / (g.hx() * g.hx())) * std::pow(std::sin(pi * g.hx() / g.Lx), 2);
    const Eigen::VectorXd dense = second_difference_x(g) * as_vector(phi);
    for (int i = 0; i < g.m; ++i) {
        for (int j = 0; j < g.n; ++j) {
            EXPECT_NEAR(second(i, j), lambda * phi(i, j), 1e-13);
            EXPECT_NEAR(second(i, j), dense(i * g.n + j), 1e-13);
        }
    }
}

TEST(Laplacian, ConstantsAndTelescoping) {
    const GridGeometry g(4.0, 7.0, 9, 5);
    EXPECT_EQ(norm_inf(laplacian(CellField(g, 3.3))), 0.0);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const CellField phi = random_cells(g, rng, -2.0, 2.0);
        EXPECT_NEAR(grid_sum(laplacian(phi)), 0.0, 1e-12);
        EXPECT_NEAR(mean(laplacian(phi)), 0.0, 1e-13);
    }
}

TEST(Laplacian, MatchesCompositionAndAssembledMatrix) {
    const GridGeometry g(6.0, 4.0, 8, 6);
    const CellField phi = CellField::generate(
        g, [&](int i, int j) { return std::cos(2 * pi * g.x(i) / g.Lx) + std::cos(2 * pi * g.y(j) / g.Ly); });
    const CellField lap = laplacian(phi);
    const CellField composed = dx(Dx(phi)) + dy(Dy(phi));
    const Eigen::VectorXd dense = (second_difference_x(g) + second_difference_y(g)) * as_vector(phi);
    const double lx = -(4.0 / (g.hx() * g.hx())) * std::pow(std::sin(pi * g.hx() / g.Lx), 2);
    const double ly = -(4.0 / (g.hy() * g.hy())) * std::pow(std::sin(pi * g.hy() / g.Ly), 2);
    for (int i = 0; i < g.m; ++i) {
        for (int j = 0; j < g.n; ++j) {
            const double expected = lx * std::cos(2 * pi * g.x(i) / g.Lx) + ly * std::cos(2 * pi * g.y(j) / g.Ly);
            EXPECT_NEAR(lap(i, j), expected, 1e-13);
            EXPECT_NEAR(lap(i, j), composed(i, j), 1e-13);
            EXPECT_NEAR(lap(i, j), dense(i * g.n + j), 1e-13);
        }
    }
}

TEST(InnerProducts, TrivialValues) {
    const GridGeometry g(50.0, 30.0, 10, 6);
    std::mt19937_64 rng(1);
    EXPECT_EQ(inner_h(random_cells(g, rng, 0, 1), CellField(g)), 0.0);
    EXPECT_NEAR(inner_h(CellField(g, 1.0), CellField(g, 1.0)), 50.0 * 30.0, 1e-10);
}

TEST(InnerProducts, ReducedEdgeFormEqualsAverageOfProducts) {
    std::mt19937_64 rng(5);
    for (const auto& g : {GridGeometry(2.0, 3.0, 4, 4), GridGeometry(1.0, 1.0, 5, 3), GridGeometry(3.0, 2.0, 2, 7)}) {
        const auto f = random_edges<EdgeFieldEW>(g, rng, -1, 1);
        const auto h = random_edges<EdgeFieldEW>(g, rng, -1, 1);
        const auto p = random_edges<EdgeFieldNS>(g, rng, -1, 1);
        const auto q = random_edges<EdgeFieldNS>(g, rng, -1, 1);
        // hx hy sum over cells of ax(f g), evaluated from the edge-to-center definition
        const double ew = g.cell_area() * grid_sum(ax(f * h));
        const double ns = g.cell_area() * grid_sum(ay(p * q));
        EXPECT_NEAR(inner_ew(f, h), ew, 1e-13);
        EXPECT_NEAR(inner_ns(p, q), ns, 1e-13);
    }
}

class RandomFieldIdentities : public ::testing::TestWithParam<std::pair<int, int>> {};

TEST_P(RandomFieldIdentities, AdjointAndSummationByParts) {
    const auto [m, n] = GetParam();
    const GridGeometry g(1.7 * m, 0.9 * n, m, n);
    std::mt19937_64 rng(static_cast<std::uint64_t>(m * 131 + n));
    for (int trial = 0; trial < 100; ++trial) {
        const CellField phi = random_cells(g, rng, -1, 1);
        const CellField psi = random_cells(g, rng, -1, 1);
        const auto f = random_edges<EdgeFieldEW>(g, rng, -1, 1);
        const auto h = random_edges<EdgeFieldNS>(g, rng, -1, 1);

        const double sf = hnorm(f) * hnorm(phi);
        const double sh = hnorm(h) * hnorm(phi);
        ASSERT_LE(scaled_err(inner_ew(f, Ax(phi)), inner_h(ax(f), phi), sf), 1e-12);
        ASSERT_LE(scaled_err(inner_ew(f, Dx(phi)), -inner_h(dx(f), phi), hnorm(f) * hnorm(Dx(phi)) + sf), 1e-12);
        ASSERT_LE(scaled_err(inner_ns(h, Ay(phi)), inner_h(ay(h), phi), sh), 1e-12);
        ASSERT_LE(scaled_err(inner_ns(h, Dy(phi)), -inner_h(dy(h), phi), hnorm(h) * hnorm(Dy(phi)) + sh), 1e-12);

        const double lhs = inner_h(phi, laplacian(psi));
        const double grad = -inner_ew(Dx(phi), Dx(psi)) - inner_ns(Dy(phi), Dy(psi));
        const double rhs = inner_h(laplacian(phi), psi);
        const double scale = hnorm(phi) * hnorm(laplacian(psi)) + hnorm(laplacian(phi)) * hnorm(psi);
        ASSERT_LE(scaled_err(lhs, grad, scale), 1e-12);
        ASSERT_LE(scaled_err(lhs, rhs, scale), 1e-12);

        const double self = inner_h(phi, laplacian(phi));
        ASSERT_LE(self, 1e-12 * dot(phi, phi));
    }
}

INSTANTIATE_TEST_SUITE_P(Grids, RandomFieldIdentities,
                         ::testing::Values(std::pair{8, 8}, std::pair{16, 16}, std::pair{33, 17}));

TEST(Laplacian, NegativeDefiniteExceptOnConstants) {
    const GridGeometry g(3.0, 3.0, 6, 6);
    const CellField c(g, 4.2);
    EXPECT_NEAR(inner_h(c, laplacian(c)), 0.0, 1e-14);
    std::mt19937_64 rng(9);
    const CellField phi = random_cells(g, rng, -1, 1);
    EXPECT_LT(inner_h(phi, laplacian(phi)), -1e-3);
}

TEST(Operators, AreLinear) {
    const GridGeometry g(2.0, 5.0, 7, 9);
    std::mt19937_64 rng(11);
    const CellField phi = random_cells(g, rng, -1, 1);
    const CellField psi = random_cells(g, rng, -1, 1);
    const double a = 1.7, b = -0.3;
    const CellField combo = a * phi + b * psi;
    EXPECT_LE(norm_inf(laplacian(combo) - (a * laplacian(phi) + b * laplacian(psi))), 1e-12);
    EXPECT_LE(norm_inf(Dx(combo) - (a * Dx(phi) + b * Dx(psi))), 1e-13);
    EXPECT_LE(norm_inf(Ay(combo) - (a * Ay(phi) + b * Ay(psi))), 1e-13);
    const auto f = random_edges<EdgeFieldEW>(g, rng, -1, 1);
    const auto h = random_edges<EdgeFieldEW>(g, rng, -1, 1);
    EXPECT_LE(norm_inf(dx(a * f + b * h) - (a * dx(f) + b * dx(h))), 1e-12);
    EXPECT_LE(norm_inf(ax(a * f + b * h) - (a * ax(f) + b * ax(h))), 1e-13);
}

TEST(Mean, ConstantsAndShift) {
    const GridGeometry g(1.0, 1.0, 5, 5);
    EXPECT_DOUBLE_EQ(mean(CellField(g, 0.42)), 0.42);
    std::mt19937_64 rng(2);
    const CellField phi = random_cells(g, rng, 0, 1);
    CellField shifted = phi;
    shifted += 2.5;
    EXPECT_NEAR(mean(shifted), mean(phi) + 2.5, 1e-14);
}

TEST(GridField, PeriodicAccessAndMismatch) {
    const GridGeometry g(1.0, 1.0, 4, 3);
    const CellField phi = CellField::generate(g, [](int i, int j) { return 10.0 * i + j; });
    EXPECT_EQ(phi.wrapped(-1, 0), phi(3, 0));
    EXPECT_EQ(phi.wrapped(4, 3), phi(0, 0));
    EXPECT_EQ(phi.wrapped(1, -1), phi(1, 2));
    const CellField other(GridGeometry(1.0, 1.0, 4, 4));
    EXPECT_THROW(inner_h(phi, other), GeometryMismatch);
    EXPECT_THROW(phi + other, GeometryMismatch);
    CellField bad = phi;
    bad(0, 0) = std::nan("");
    EXPECT_THROW(require_finite(bad, "phi"), NonFiniteValue);
}
