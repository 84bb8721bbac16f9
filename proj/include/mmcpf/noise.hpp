#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

#include "grid.hpp"

namespace mmcpf {

/// Identifies one noise increment: which run, which ensemble member, which step.
struct NoiseLineage {
    std::uint64_t seed = 0;
    std::uint64_t sample = 0;
    std::uint64_t step = 0;
};

/// Name recorded in run manifests; change it whenever the bit stream changes.
inline constexpr const char* kNoiseGeneratorId = "splitmix64-counter/boost-erfc_inv-normal/v1";

/**
 * @brief Counter-based keyed generator.
 *
 * The k-th output for a key is the SplitMix64 finalizer applied to
 * key + (k + 1) * golden_gamma, so any element of any stream can be produced
 * without touching the others.
 */
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t key_for(const NoiseLineage& l, std::uint64_t field_id) noexcept {
        std::uint64_t k = mix(l.seed + kGamma);
        k = mix(k ^ (l.sample + kGamma));
        k = mix(k ^ (l.step + 2 * kGamma));
        k = mix(k ^ (field_id + 3 * kGamma));
        return k;
    }

    std::uint64_t bits(std::uint64_t counter) const noexcept { return mix(key_ + (counter + 1) * kGamma); }

    /// Uniform on the open interval (0, 1).
    double uniform(std::uint64_t counter) const noexcept {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by inverse CDF: -sqrt(2) erfc^{-1}(2u).
    double normal(std::uint64_t counter) const {
        return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * uniform(counter));
    }

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
    std::uint64_t key_;
};

/// The pair (r1, r2) of independent standard normal cell fields for one step.
struct NoiseDraw {
    CellField r1;
    CellField r2;
    NoiseLineage lineage;
};

inline CellField normal_field(const GridGeometry& geom, const NoiseLineage& lineage, std::uint64_t field_id) {
    const CounterRng rng(CounterRng::key_for(lineage, field_id));
    CellField out(geom);
    auto v = out.values();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = rng.normal(k);
    return out;
}

inline NoiseDraw draw_normals(const GridGeometry& geom, const NoiseLineage& lineage) {
    return {normal_field(geom, lineage, 0), normal_field(geom, lineage, 1), lineage};
}

/**
 * xi = -sqrt(2) / sqrt(hx hy s) (ax Dx r1 + ay Dy r2).
 *
 * Evaluated as dx(c Ax r1) + dy(c Ay r2), which is the same stencil written as
 * a difference of edge fluxes, so the grid sum telescopes to round-off of a
 * single subtraction per cell.
 */
inline CellField noise_from_draw(const NoiseDraw& draw, double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("noise time step must be positive");
    const GridGeometry& g = draw.r1.geometry();
    const double c = -std::numbers::sqrt2 / std::sqrt(g.cell_area() * s);
    EdgeFieldEW fx = Ax(draw.r1);
    EdgeFieldNS fy = Ay(draw.r2);
    fx *= c / g.hx();
    fy *= c / g.hy();
    CellField xi(g);
    for (int i = 0; i < g.m; ++i) {
        const int im = i == 0 ? g.m - 1 : i - 1;
        for (int j = 0; j < g.n; ++j) {
            const int jm = j == 0 ? g.n - 1 : j - 1;
            xi(i, j) = (fx(i, j) - fx(im, j)) + (fy(i, j) - fy(i, jm));
        }
    }
    return xi;
}

/// Noise for the step that advances t_k to t_{k+1}; lineage.step carries k.
inline CellField sample_noise(const GridGeometry& geom, double s, const NoiseLineage& lineage) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("noise time step must be positive");
    return noise_from_draw(draw_normals(geom, lineage), s);
}

}  // namespace mmcpf
