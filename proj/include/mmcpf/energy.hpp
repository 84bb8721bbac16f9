#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "grid.hpp"
#include "params.hpp"
#include "summation.hpp"

namespace mmcpf {

/// Half-width of the excluded band at each end of (0, 1/rho).
inline constexpr double kDomainGuard = 1e-12;

/// A concentration left the admissible interval [guard, 1/rho - guard].
class DomainError : public std::domain_error {
public:
    DomainError(int i, int j, double value, double upper)
        : std::domain_error(describe(i, j, value, upper)), i_(i), j_(j), value_(value) {}

    int i() const noexcept { return i_; }
    int j() const noexcept { return j_; }
    double value() const noexcept { return value_; }

private:
    static std::string describe(int i, int j, double v, double upper) {
        std::ostringstream os;
        os.precision(17);
        os << "concentration " << v << " at cell (" << i << ", " << j << ") outside admissible interval ["
           << kDomainGuard << ", " << upper << "]";
        return os.str();
    }

    int i_;
    int j_;
    double value_;
};

/**
 * @brief Pointwise pieces of the reticular free energy and de Gennes coefficient.
 *
 * S(u)  = u/tau ln(alpha u/tau) + u/N ln(beta u/tau) + (1 - rho u) ln(1 - rho u)
 * H(u)  = chi u (1 - rho u)
 * k(u)  = 1 / (36 u (1 - u))
 *
 * `S_prime_scheme` and `H_prime_scheme` drop the additive constants of the
 * exact derivatives; they only enter the scheme behind a Laplacian.
 */
class ScalarEnergyFns {
public:
    explicit ScalarEnergyFns(const ModelParams& p)
        : p_(p), c_ent_(1.0 / p.tau + 1.0 / p.N), upper_(1.0 / p.rho - kDomainGuard) {}

    const ModelParams& params() const noexcept { return p_; }
    double lower_bound() const noexcept { return kDomainGuard; }
    double upper_bound() const noexcept { return upper_; }
    bool in_domain(double u) const noexcept { return u >= kDomainGuard && u <= upper_; }

    void require(double u) const {
        if (!in_domain(u)) throw DomainError(-1, -1, u, upper_);
    }

    double S(double u) const {
        require(u);
        const double w = 1.0 - p_.rho * u;
        return u / p_.tau * std::log(p_.alpha * u / p_.tau) + u / p_.N * std::log(p_.beta * u / p_.tau) +
               w * std::log(w);
    }
    /// Exact derivative of S, constants included.
    double S_prime(double u) const {
        require(u);
        return (std::log(p_.alpha * u / p_.tau) + 1.0) / p_.tau + (std::log(p_.beta * u / p_.tau) + 1.0) / p_.N -
               p_.rho * (std::log(1.0 - p_.rho * u) + 1.0);
    }
    double S_prime_scheme(double u) const {
        require(u);
        return c_ent_ * std::log(u) - p_.rho * std::log(1.0 - p_.rho * u);
    }
    /// S_prime(u) - S_prime_scheme(u), independent of u.
    double S_prime_dropped_constant() const noexcept {
        return (std::log(p_.alpha / p_.tau) + 1.0) / p_.tau + (std::log(p_.beta / p_.tau) + 1.0) / p_.N - p_.rho;
    }
    double S_second(double u) const {
        require(u);
        return c_ent_ / u + p_.rho * p_.rho / (1.0 - p_.rho * u);
    }

    double H(double u) const noexcept { return p_.chi * u * (1.0 - p_.rho * u); }
    double H_prime(double u) const noexcept { return p_.chi * (1.0 - 2.0 * p_.rho * u); }
    double H_prime_scheme(double u) const noexcept { return -2.0 * p_.chi * p_.rho * u; }
    double H_second() const noexcept { return -2.0 * p_.chi * p_.rho; }

    double kappa(double u) const {
        require(u);
        return 1.0 / (36.0 * u * (1.0 - u));
    }
    double kappa_prime(double u) const {
        require(u);
        const double w = u * (1.0 - u);
        return (2.0 * u - 1.0) / (36.0 * w * w);
    }
    /// (1,1) entry of the Hessian of kappa(u) v^2, divided by v^2.
    double kappa_second(double u) const {
        require(u);
        const double w = u * (1.0 - u);
        return (3.0 * u * u - 3.0 * u + 1.0) / (18.0 * w * w * w);
    }

private:
    ModelParams p_;
    double c_ent_;
    double upper_;
};

/// Throws DomainError naming the first offending cell in storage order.
inline void require_in_domain(const CellField& phi, const ModelParams& p) {
    const ScalarEnergyFns fns(p);
    for (int i = 0; i < phi.m(); ++i)
        for (int j = 0; j < phi.n(); ++j)
            if (!fns.in_domain(phi(i, j))) throw DomainError(i, j, phi(i, j), fns.upper_bound());
}

inline bool in_domain(const CellField& phi, const ModelParams& p) {
    const ScalarEnergyFns fns(p);
    for (double v : phi.values())
        if (!fns.in_domain(v)) return false;
    return true;
}

/// ax((Dx phi)^2) + ay((Dy phi)^2): the cell-centered squared gradient.
inline CellField gradient_square(const CellField& phi) {
    const EdgeFieldEW gx = Dx(phi);
    const EdgeFieldNS gy = Dy(phi);
    return ax(gx * gx) + ay(gy * gy);
}

struct EnergyReport {
    double F = 0.0;
    double Fc = 0.0;  ///< entropic part plus gradient part
    double Fe = 0.0;  ///< minus the Huggins part
};

inline EnergyReport discrete_energy(const CellField& phi, const ModelParams& p) {
    require_in_domain(phi, p);
    const ScalarEnergyFns fns(p);
    const CellField g2 = gradient_square(phi);
    CompensatedSum total, convex, expansive;
    for (int i = 0; i < phi.m(); ++i) {
        for (int j = 0; j < phi.n(); ++j) {
            const double u = phi(i, j);
            const double s = fns.S(u);
            const double h = fns.H(u);
            const double grad = fns.kappa(u) * g2(i, j);
            total += s + h + grad;
            convex += s + grad;
            expansive += -h;
        }
    }
    const double area = phi.geometry().cell_area();
    return {area * total.value(), area * convex.value(), area * expansive.value()};
}

/// Variational derivative of F_c with the constant of S' dropped:
/// S'(phi) + k'(phi) (ax((Dx phi)^2) + ay((Dy phi)^2)) - 2 dx(Ax k(phi) Dx phi) - 2 dy(Ay k(phi) Dy phi)
inline CellField var_deriv_Fc(const CellField& phi, const ModelParams& p) {
    require_in_domain(phi, p);
    const ScalarEnergyFns fns(p);
    const GridGeometry& g = phi.geometry();
    CellField kap(g), local(g);
    const CellField g2 = gradient_square(phi);
    for (int i = 0; i < g.m; ++i) {
        for (int j = 0; j < g.n; ++j) {
            const double u = phi(i, j);
            kap(i, j) = fns.kappa(u);
            local(i, j) = fns.S_prime_scheme(u) + fns.kappa_prime(u) * g2(i, j);
        }
    }
    const CellField flux_div = dx(Ax(kap) * Dx(phi)) + dy(Ay(kap) * Dy(phi));
    return local.axpy(-2.0, flux_div);
}

/// -H'(phi) with the constant dropped: 2 chi rho phi.
inline CellField var_deriv_Fe(const CellField& phi, const ModelParams& p) {
    return (2.0 * p.chi * p.rho) * phi;
}

/**
 * @brief Action of (1 / hx hy) times the Hessian of F_c at a fixed state.
 *
 * All coefficient fields depending only on phi are evaluated once, so that
 * repeated applications inside a Krylov solve cost a handful of stencil passes.
 */
class HessianOperator {
public:
    HessianOperator(const CellField& phi, const ModelParams& p)
        : dphi_x_(Dx(phi)), dphi_y_(Dy(phi)), kp_(phi.geometry()), diag_(phi.geometry()) {
        require_in_domain(phi, p);
        const ScalarEnergyFns fns(p);
        const GridGeometry& g = phi.geometry();
        const CellField g2 = ax(dphi_x_ * dphi_x_) + ay(dphi_y_ * dphi_y_);
        CellField kap(g);
        for (int i = 0; i < g.m; ++i) {
            for (int j = 0; j < g.n; ++j) {
                const double u = phi(i, j);
                kap(i, j) = fns.kappa(u);
                kp_(i, j) = fns.kappa_prime(u);
                diag_(i, j) = fns.S_second(u) + fns.kappa_second(u) * g2(i, j);
            }
        }
        akap_x_ = Ax(kap);
        akap_y_ = Ay(kap);
    }

    const GridGeometry& geometry() const noexcept { return diag_.geometry(); }

    CellField apply(const CellField& psi) const {
        diag_.check_same(psi);
        const EdgeFieldEW dpsi_x = Dx(psi);
        const EdgeFieldNS dpsi_y = Dy(psi);
        const CellField kpsi = kp_ * psi;
        CellField out = diag_ * psi;
        out.axpy(2.0, kp_ * (ax(dphi_x_ * dpsi_x) + ay(dphi_y_ * dpsi_y)));
        out.axpy(-2.0, dx(Ax(kpsi) * dphi_x_ + akap_x_ * dpsi_x));
        out.axpy(-2.0, dy(Ay(kpsi) * dphi_y_ + akap_y_ * dpsi_y));
        return out;
    }

private:
    EdgeFieldEW dphi_x_;
    EdgeFieldNS dphi_y_;
    CellField kp_;
    CellField diag_;  ///< S''(phi) + k''(phi) |grad phi|^2
    EdgeFieldEW akap_x_;
    EdgeFieldNS akap_y_;
};

inline CellField hessian_action(const CellField& phi, const CellField& psi, const ModelParams& p) {
    return HessianOperator(phi, p).apply(psi);
}

}  // namespace mmcpf
