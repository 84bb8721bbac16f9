#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "energy.hpp"
#include "grid.hpp"
#include "noise.hpp"
#include "solver.hpp"

namespace mmcpf {

struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;   ///< worst observed value of the checked quantity
    double tolerance = 0.0;
};

namespace detail {

inline CellField random_field(const GridGeometry& g, std::uint64_t key, double lo, double hi) {
    const CounterRng rng(key);
    CellField f(g);
    auto v = f.values();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = lo + (hi - lo) * rng.uniform(k);
    return f;
}

inline double rel(double a, double b) { return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)}); }

}  // namespace detail

/**
 * @brief Self-test of the discrete invariants on a small grid.
 *
 * Used by the `check` subcommand. Every entry reports the worst value seen
 * over a few random states next to the tolerance it must stay under.
 */
inline std::vector<CheckResult> run_property_checks(const ModelParams& p, const GridGeometry& g, std::uint64_t seed,
                                                    int trials = 5) {
    std::vector<CheckResult> out;
    auto key = [&](std::uint64_t a, std::uint64_t b) { return CounterRng::key_for({seed, a, b}, 7); };

    double adj = 0.0, sbp = 0.0, split = 0.0, hsym = 0.0, hpsd = 0.0, jac = 0.0, mass = 0.0, decay = 0.0;
    double xi_sum = 0.0;
    for (int t = 0; t < trials; ++t) {
        const auto tt = static_cast<std::uint64_t>(t);
        const CellField phi = detail::random_field(g, key(tt, 0), 0.2, 0.6);
        const CellField psi = detail::random_field(g, key(tt, 1), -1.0, 1.0);
        const CellField chi = detail::random_field(g, key(tt, 2), -1.0, 1.0);
        const CellField fv = detail::random_field(g, key(tt, 3), -1.0, 1.0);
        const EdgeFieldEW f(g, std::vector<double>(fv.values().begin(), fv.values().end()));

        adj = std::max(adj, detail::rel(inner_ew(f, Ax(psi)), inner_h(ax(f), psi)));
        adj = std::max(adj, detail::rel(inner_ew(f, Dx(psi)), -inner_h(dx(f), psi)));
        const double lhs = inner_h(psi, laplacian(chi));
        sbp = std::max(sbp, detail::rel(lhs, -inner_ew(Dx(psi), Dx(chi)) - inner_ns(Dy(psi), Dy(chi))));
        sbp = std::max(sbp, detail::rel(lhs, inner_h(laplacian(psi), chi)));

        const EnergyReport e = discrete_energy(phi, p);
        split = std::max(split, detail::rel(e.F, e.Fc - e.Fe));

        const HessianOperator hess(phi, p);
        hsym = std::max(hsym, detail::rel(inner_h(psi, hess.apply(chi)), inner_h(hess.apply(psi), chi)));
        hpsd = std::min(hpsd, inner_h(psi, hess.apply(psi)) / std::max(1e-300, inner_h(psi, psi)));

        const double s = 0.01, h = 1e-6;
        const StepProblem prob(phi, s, 0.0, nullptr, p);
        const CellField dir = 0.01 * psi;
        const CellField fd = (1.0 / (2 * h)) * (prob.residual(phi + h * dir) - prob.residual(phi - h * dir));
        const CellField an = prob.jacobian(phi)(dir);
        jac = std::max(jac, norm_inf(fd - an) / std::max(1e-300, norm_inf(an)));

        for (double step : {1e-3, 1e-1, 1.0}) {
            const StepSolution sol = newton_solve(StepProblem(phi, step, 0.0, nullptr, p), NewtonSettings{});
            mass = std::max(mass, std::fabs(mean(sol.phi) - mean(phi)));
            const double F1 = discrete_energy(sol.phi, p).F;
            decay = std::max(decay, (F1 - e.F) / std::max(1.0, std::fabs(e.F)));
        }

        const CellField xi = sample_noise(g, 0.01, {seed, tt, 0});
        xi_sum = std::max(xi_sum, std::fabs(mean(xi)));
    }
    out.push_back({"adjoint identities", adj <= 1e-12, adj, 1e-12});
    out.push_back({"summation by parts", sbp <= 1e-12, sbp, 1e-12});
    out.push_back({"energy split F = Fc - Fe", split <= 1e-12, split, 1e-12});
    out.push_back({"Hessian symmetry", hsym <= 1e-10, hsym, 1e-10});
    out.push_back({"Hessian positive semidefinite", hpsd >= -1e-10, hpsd, -1e-10});
    out.push_back({"Jacobian vs finite difference", jac <= 1e-5, jac, 1e-5});
    out.push_back({"mass conservation per step", mass <= 1e-12, mass, 1e-12});
    out.push_back({"energy decay per step", decay <= 1e-10, decay, 1e-10});
    out.push_back({"noise mean", xi_sum <= 1e-13, xi_sum, 1e-13});
    return out;
}

}  // namespace mmcpf
