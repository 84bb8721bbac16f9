#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mmcpf/noise.hpp"
#include "test_support.hpp"

using namespace mmcpf;

namespace {

double stencil_variance(const GridGeometry& g, double s) {
    const double hx = g.hx(), hy = g.hy();
    return 2.0 / (hx * hy * s) * (1.0 / (2 * hx * hx) + 1.0 / (2 * hy * hy));
}

}  // namespace

TEST(CounterRng, UniformStaysInsideOpenInterval) {
    const CounterRng rng(CounterRng::key_for({7, 0, 0}, 0));
    for (std::uint64_t k = 0; k < 100000; ++k) {
        const double u = rng.uniform(k);
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(CounterRng, KeysSeparateLineages) {
    std::set<std::uint64_t> keys;
    for (std::uint64_t seed = 0; seed < 4; ++seed)
        for (std::uint64_t sample = 0; sample < 4; ++sample)
            for (std::uint64_t step = 0; step < 4; ++step)
                for (std::uint64_t f = 0; f < 3; ++f) keys.insert(CounterRng::key_for({seed, sample, step}, f));
    EXPECT_EQ(keys.size(), 4u * 4 * 4 * 3);
}

TEST(CounterRng, NormalMoments) {
    const CounterRng rng(CounterRng::key_for({1, 2, 3}, 0));
    const int n = 1000000;
    double s1 = 0, s2 = 0, s4 = 0;
    int tail = 0;
    for (int k = 0; k < n; ++k) {
        const double z = rng.normal(static_cast<std::uint64_t>(k));
        s1 += z;
        s2 += z * z;
        s4 += z * z * z * z;
        if (std::fabs(z) > 1.959963984540054) ++tail;
    }
    EXPECT_NEAR(s1 / n, 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(s4 / n, 3.0, 5.0 * std::sqrt(96.0 / n));
    EXPECT_NEAR(static_cast<double>(tail) / n, 0.05, 5.0 * std::sqrt(0.05 * 0.95 / n));
}

TEST(Noise, GridSumVanishes) {
    const GridGeometry g = mmcpf::testing::desk_geometry(64, 64);
    for (std::uint64_t step = 0; step < 20; ++step) {
        const CellField xi = sample_noise(g, 1e-3, {0, 0, step});
        EXPECT_LE(std::fabs(grid_sum(xi)), 1e-13 * norm_inf(xi) * g.size());
        EXPECT_LE(std::fabs(mean(xi)), 1e-13 * norm_inf(xi));
    }
}

TEST(Noise, ReproducibleFromLineage) {
    const GridGeometry g = mmcpf::testing::desk_geometry(16, 12);
    const CellField a = sample_noise(g, 0.01, {5, 2, 9});
    const CellField b = sample_noise(g, 0.01, {5, 2, 9});
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == sample_noise(g, 0.01, {5, 2, 10}));
    EXPECT_FALSE(a == sample_noise(g, 0.01, {5, 3, 9}));
    EXPECT_FALSE(a == sample_noise(g, 0.01, {6, 2, 9}));
}

TEST(Noise, ScalesWithInverseRootStep) {
    const GridGeometry g = mmcpf::testing::desk_geometry(8, 8);
    const NoiseDraw d = draw_normals(g, {0, 0, 0});
    const CellField a = noise_from_draw(d, 0.01);
    const CellField b = noise_from_draw(d, 0.04);
    EXPECT_LE(norm_inf(a - 2.0 * b), 1e-13 * norm_inf(a));
}

TEST(Noise, MatchesStencilFormula) {
    const GridGeometry g(3.0, 2.0, 6, 5);
    const NoiseDraw d = draw_normals(g, {3, 0, 1});
    const double s = 0.02;
    const CellField xi = noise_from_draw(d, s);
    const double c = -std::sqrt(2.0) / std::sqrt(g.hx() * g.hy() * s);
    for (int i = 0; i < g.m; ++i) {
        for (int j = 0; j < g.n; ++j) {
            const double ex = (d.r1.wrapped(i + 1, j) - d.r1.wrapped(i - 1, j)) / (2 * g.hx()) +
                              (d.r2.wrapped(i, j + 1) - d.r2.wrapped(i, j - 1)) / (2 * g.hy());
            EXPECT_NEAR(xi(i, j), c * ex, 1e-12 * std::fabs(c));
        }
    }
}

TEST(Noise, MonteCarloMeanAndVariance) {
    const GridGeometry g = mmcpf::testing::desk_geometry(8, 8);
    const double s = 1e-3;
    const double var = stencil_variance(g, s);
    const int steps = 4000;
    double s1 = 0, s2 = 0, cross = 0;
    CellField prev(g);
    for (int k = 0; k < steps; ++k) {
        const CellField xi = sample_noise(g, s, {11, 0, static_cast<std::uint64_t>(k)});
        s1 += xi(3, 4);
        s2 += xi(3, 4) * xi(3, 4);
        if (k > 0) cross += xi(3, 4) * prev(3, 4);
        prev = xi;
    }
    EXPECT_NEAR(s1 / steps, 0.0, 5.0 * std::sqrt(var / steps));
    EXPECT_NEAR(s2 / steps / var, 1.0, 5.0 * std::sqrt(2.0 / steps));
    EXPECT_NEAR(cross / (steps - 1) / var, 0.0, 5.0 / std::sqrt(steps));
}

TEST(Noise, RejectsNonPositiveStep) {
    const GridGeometry g(1.0, 1.0, 4, 4);
    EXPECT_THROW(sample_noise(g, 0.0, {}), std::invalid_argument);
    EXPECT_THROW(sample_noise(g, -1e-3, {}), std::invalid_argument);
    EXPECT_THROW(noise_from_draw(draw_normals(g, {}), std::nan("")), std::invalid_argument);
}
