#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "params.hpp"
#include "summation.hpp"

namespace mmcpf {

class GeometryMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NonFiniteValue : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace location {
struct Cell {};
struct EdgeEW {};  ///< entry (i, j) lives on the edge (x_{i+1/2}, y_j)
struct EdgeNS {};  ///< entry (i, j) lives on the edge (x_i, y_{j+1/2})
}  // namespace location

/**
 * @brief An m x n grid function on a periodic mesh.
 *
 * Indices are zero-based; (i, j) maps to storage slot i * n + j, so the last
 * index runs fastest. Periodic extension is implicit: `wrapped(i, j)` accepts
 * any integer index. Under periodicity each edge family has exactly m x n
 * unique members, so all three location kinds share this layout.
 */
template <class Location>
class GridField {
public:
    GridField() = default;
    explicit GridField(const GridGeometry& geom, double value = 0.0)
        : geom_(geom), values_(geom.size(), value) {}
    GridField(const GridGeometry& geom, std::vector<double> values) : geom_(geom), values_(std::move(values)) {
        if (values_.size() != geom_.size())
            throw GeometryMismatch("field value count does not match grid size");
    }

    const GridGeometry& geometry() const noexcept { return geom_; }
    int m() const noexcept { return geom_.m; }
    int n() const noexcept { return geom_.n; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(int i, int j) noexcept { return values_[index(i, j)]; }
    double operator()(int i, int j) const noexcept { return values_[index(i, j)]; }

    double wrapped(int i, int j) const noexcept {
        const int mi = ((i % geom_.m) + geom_.m) % geom_.m;
        const int nj = ((j % geom_.n) + geom_.n) % geom_.n;
        return values_[index(mi, nj)];
    }

    std::span<double> values() & noexcept { return values_; }
    std::span<const double> values() const& noexcept { return values_; }
    void values() && = delete;
    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }

    template <class F>
    static GridField generate(const GridGeometry& geom, F&& f) {
        GridField out(geom);
        for (int i = 0; i < geom.m; ++i)
            for (int j = 0; j < geom.n; ++j) out(i, j) = f(i, j);
        return out;
    }

    GridField& operator+=(const GridField& o) {
        check_same(o);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
        return *this;
    }
    GridField& operator-=(const GridField& o) {
        check_same(o);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
        return *this;
    }
    GridField& operator*=(double a) noexcept {
        for (double& v : values_) v *= a;
        return *this;
    }
    GridField& operator+=(double c) noexcept {
        for (double& v : values_) v += c;
        return *this;
    }

    /// this += a * x
    GridField& axpy(double a, const GridField& x) {
        check_same(x);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += a * x.values_[k];
        return *this;
    }

    friend GridField operator+(GridField a, const GridField& b) { return a += b; }
    friend GridField operator-(GridField a, const GridField& b) { return a -= b; }
    friend GridField operator*(double s, GridField a) { return a *= s; }
    friend GridField operator*(GridField a, double s) { return a *= s; }

    /// Pointwise product.
    friend GridField operator*(const GridField& a, const GridField& b) {
        a.check_same(b);
        GridField out(a.geom_);
        for (std::size_t k = 0; k < a.values_.size(); ++k) out.values_[k] = a.values_[k] * b.values_[k];
        return out;
    }

    friend bool operator==(const GridField&, const GridField&) = default;

    bool same_geometry(const GridField& o) const noexcept { return geom_ == o.geom_; }
    void check_same(const GridField& o) const {
        if (!same_geometry(o)) throw GeometryMismatch("grid fields live on different geometries");
    }

    bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    std::size_t index(int i, int j) const noexcept {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(geom_.n) + static_cast<std::size_t>(j);
    }

    GridGeometry geom_;
    std::vector<double> values_;
};

using CellField = GridField<location::Cell>;
using EdgeFieldEW = GridField<location::EdgeEW>;
using EdgeFieldNS = GridField<location::EdgeNS>;

template <class L>
void require_finite(const GridField<L>& f, const char* what) {
    if (!f.all_finite()) throw NonFiniteValue(std::string(what) + " contains NaN or Inf");
}

namespace detail {
inline int next(int i, int m) noexcept { return i + 1 == m ? 0 : i + 1; }
inline int prev(int i, int m) noexcept { return i == 0 ? m - 1 : i - 1; }

template <class Out, class In, class Stencil>
Out apply_x(const In& f, Stencil&& st) {
    const int m = f.m(), n = f.n();
    Out out(f.geometry());
    for (int i = 0; i < m; ++i) {
        const int ip = next(i, m), im = prev(i, m);
        for (int j = 0; j < n; ++j) out(i, j) = st(f(im, j), f(i, j), f(ip, j));
    }
    return out;
}

template <class Out, class In, class Stencil>
Out apply_y(const In& f, Stencil&& st) {
    const int m = f.m(), n = f.n();
    Out out(f.geometry());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = st(f(i, prev(j, n)), f(i, j), f(i, next(j, n)));
    return out;
}
}  // namespace detail

// Edge-to-center operators. Cell i sits between edges i-1/2 (slot i-1) and i+1/2 (slot i).

inline CellField ax(const EdgeFieldEW& f) {
    return detail::apply_x<CellField>(f, [](double lo, double c, double) { return 0.5 * (c + lo); });
}
inline CellField dx(const EdgeFieldEW& f) {
    const double inv = 1.0 / f.geometry().hx();
    return detail::apply_x<CellField>(f, [inv](double lo, double c, double) { return (c - lo) * inv; });
}
inline CellField ay(const EdgeFieldNS& g) {
    return detail::apply_y<CellField>(g, [](double lo, double c, double) { return 0.5 * (c + lo); });
}
inline CellField dy(const EdgeFieldNS& g) {
    const double inv = 1.0 / g.geometry().hy();
    return detail::apply_y<CellField>(g, [inv](double lo, double c, double) { return (c - lo) * inv; });
}

// Center-to-edge operators. Edge i+1/2 sits between cells i and i+1.

inline EdgeFieldEW Ax(const CellField& phi) {
    return detail::apply_x<EdgeFieldEW>(phi, [](double, double c, double hi) { return 0.5 * (hi + c); });
}
inline EdgeFieldEW Dx(const CellField& phi) {
    const double inv = 1.0 / phi.geometry().hx();
    return detail::apply_x<EdgeFieldEW>(phi, [inv](double, double c, double hi) { return (hi - c) * inv; });
}
inline EdgeFieldNS Ay(const CellField& phi) {
    return detail::apply_y<EdgeFieldNS>(phi, [](double, double c, double hi) { return 0.5 * (hi + c); });
}
inline EdgeFieldNS Dy(const CellField& phi) {
    const double inv = 1.0 / phi.geometry().hy();
    return detail::apply_y<EdgeFieldNS>(phi, [inv](double, double c, double hi) { return (hi - c) * inv; });
}

/// Five-point periodic Laplacian, dx(Dx phi) + dy(Dy phi), fused into one pass.
inline CellField laplacian(const CellField& phi) {
    const GridGeometry& g = phi.geometry();
    const int m = g.m, n = g.n;
    const double cx = 1.0 / (g.hx() * g.hx());
    const double cy = 1.0 / (g.hy() * g.hy());
    CellField out(g);
    for (int i = 0; i < m; ++i) {
        const int ip = detail::next(i, m), im = detail::prev(i, m);
        for (int j = 0; j < n; ++j) {
            const int jp = detail::next(j, n), jm = detail::prev(j, n);
            const double c = phi(i, j);
            out(i, j) = ((phi(ip, j) - c) - (c - phi(im, j))) * cx + ((phi(i, jp) - c) - (c - phi(i, jm))) * cy;
        }
    }
    return out;
}

/// Compensated sum over all entries in storage order.
template <class L>
double grid_sum(const GridField<L>& f) {
    CompensatedSum s;
    for (double v : f.values()) s += v;
    return s.value();
}

namespace detail {
template <class L>
double weighted_dot(const GridField<L>& a, const GridField<L>& b) {
    a.check_same(b);
    CompensatedSum s;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
    return a.geometry().cell_area() * s.value();
}
}  // namespace detail

/// (phi, psi)_h = hx hy sum phi psi
inline double inner_h(const CellField& a, const CellField& b) { return detail::weighted_dot(a, b); }

/// [f, g]_ew. With unique-edge storage the average-of-products form reduces to
/// hx hy times the plain sum over edges.
inline double inner_ew(const EdgeFieldEW& f, const EdgeFieldEW& g) { return detail::weighted_dot(f, g); }
inline double inner_ns(const EdgeFieldNS& f, const EdgeFieldNS& g) { return detail::weighted_dot(f, g); }

inline double mean(const CellField& phi) { return grid_sum(phi) / static_cast<double>(phi.size()); }

template <class L>
double norm2(const GridField<L>& f) {
    CompensatedSum s;
    for (double v : f.values()) s += v * v;
    return std::sqrt(s.value());
}

template <class L>
double norm_inf(const GridField<L>& f) {
    double r = 0.0;
    for (double v : f.values()) r = std::max(r, std::fabs(v));
    return r;
}

template <class L>
double dot(const GridField<L>& a, const GridField<L>& b) {
    CompensatedSum s;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
    return s.value();
}

}  // namespace mmcpf
