#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mmcpf {

/// Raised when a model, grid or run parameter violates its constraint.
/// `field()` names the offending parameter.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/**
 * @brief Constants of the reticular free energy.
 *
 * chi, M, N and epsilon are user inputs; alpha, beta, tau and rho are derived
 * from M and N once on construction. The admissible concentration interval is
 * (0, 1/rho), a strict subset of (0, 1) because rho > 1.
 */
struct ModelParams {
    double chi = 0.0;      ///< Huggins interaction parameter
    double M = 0.0;        ///< relative microsphere volume
    double N = 0.0;        ///< degree of polymerization
    double epsilon = 0.0;  ///< noise strength
    double alpha = 0.0;
    double beta = 0.0;
    double tau = 0.0;
    double rho = 0.0;
    double D = 1.0;        ///< diffusion coefficient, normalized

    /// Upper end of the admissible concentration interval.
    double phi_max() const noexcept { return 1.0 / rho; }
};

inline ModelParams derive_params(double M, double N, double chi, double epsilon) {
    if (!(M > 0.0) || !std::isfinite(M)) throw ValidationError("M", "must be a positive finite number");
    if (!(N > 0.0) || !std::isfinite(N)) throw ValidationError("N", "must be a positive finite number");
    if (!(chi > 0.0) || !std::isfinite(chi)) throw ValidationError("chi", "must be a positive finite number");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw ValidationError("epsilon", "must be a nonnegative finite number");

    constexpr double pi = std::numbers::pi;
    ModelParams p;
    p.chi = chi;
    p.M = M;
    p.N = N;
    p.epsilon = epsilon;
    const double r = std::sqrt(M / pi) + N / 2.0;
    const double sqrt_pi_m = std::sqrt(pi * M);
    p.alpha = pi * r * r;
    p.beta = p.alpha / sqrt_pi_m;
    p.tau = sqrt_pi_m * N;
    p.rho = 1.0 + M / p.tau;
    return p;
}

/// Uniform periodic mesh on (0, Lx) x (0, Ly) with m x n cells.
struct GridGeometry {
    double Lx = 1.0;
    double Ly = 1.0;
    int m = 2;
    int n = 2;

    GridGeometry() = default;
    GridGeometry(double lx, double ly, int cells_x, int cells_y) : Lx(lx), Ly(ly), m(cells_x), n(cells_y) {
        if (!(Lx > 0.0) || !std::isfinite(Lx)) throw ValidationError("Lx", "must be a positive finite number");
        if (!(Ly > 0.0) || !std::isfinite(Ly)) throw ValidationError("Ly", "must be a positive finite number");
        if (m < 2) throw ValidationError("m", "must be at least 2");
        if (n < 2) throw ValidationError("n", "must be at least 2");
    }

    double hx() const noexcept { return Lx / m; }
    double hy() const noexcept { return Ly / n; }
    double cell_area() const noexcept { return hx() * hy(); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(m) * static_cast<std::size_t>(n); }

    /// Cell-center coordinates for zero-based indices.
    double x(int i) const noexcept { return (i + 0.5) * hx(); }
    double y(int j) const noexcept { return (j + 0.5) * hy(); }

    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

}  // namespace mmcpf
