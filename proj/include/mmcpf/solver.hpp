#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "energy.hpp"
#include "grid.hpp"
#include "params.hpp"

namespace mmcpf {

struct GmresSettings {
    double tol = 1e-8;        ///< relative residual target ||Ax - b||_2 / ||b||_2
    int restart = 40;
    int max_restarts = 25;
};

struct NewtonSettings {
    double tol_newton = 1e-9;  ///< max-norm of the Newton direction
    int max_newton_iters = 50;
    double tol_gmres = 1e-8;
    int gmres_restart = 40;
    int max_gmres_restarts = 25;
    double min_damping = 0x1.0p-30;

    GmresSettings gmres() const { return {tol_gmres, gmres_restart, max_gmres_restarts}; }

    void validate() const {
        if (!(tol_newton > 0.0)) throw ValidationError("tol_newton", "must be positive");
        if (max_newton_iters < 1) throw ValidationError("max_newton", "must be at least 1");
        if (!(tol_gmres > 0.0)) throw ValidationError("tol_gmres", "must be positive");
        if (gmres_restart < 1) throw ValidationError("restart", "must be at least 1");
        if (max_gmres_restarts < 1) throw ValidationError("max_restarts", "must be at least 1");
        if (!(min_damping > 0.0 && min_damping <= 1.0)) throw ValidationError("min_damping", "must lie in (0, 1]");
    }
};

struct GmresResult {
    CellField x;
    int iterations = 0;
    double relative_residual = 0.0;  ///< recomputed from x, not the Arnoldi estimate
};

/// GMRES hit its restart budget. Carries the best iterate found.
class GmresError : public std::runtime_error {
public:
    explicit GmresError(GmresResult best)
        : std::runtime_error("GMRES did not converge; relative residual " + std::to_string(best.relative_residual)),
          best_(std::move(best)) {}

    const GmresResult& best() const noexcept { return best_; }

private:
    GmresResult best_;
};

struct IdentityPreconditioner {
    CellField operator()(const CellField& v) const { return v; }
};

/**
 * @brief Restarted GMRES with modified Gram-Schmidt and Givens rotations.
 *
 * Solves apply(x) = rhs from x = 0 with right preconditioning. A preconditioner
 * maps a Krylov vector v to an approximation of apply^{-1} v.
 */
template <class Apply, class Precond = IdentityPreconditioner>
GmresResult gmres(Apply&& apply, const CellField& rhs, const GmresSettings& settings, Precond&& precond = {}) {
    require_finite(rhs, "GMRES right-hand side");
    const GridGeometry& geom = rhs.geometry();
    const double rhs_norm = norm2(rhs);
    GmresResult result{CellField(geom), 0, 0.0};
    if (rhs_norm == 0.0) return result;

    const int k_max = settings.restart;
    CellField r = rhs;
    double beta = rhs_norm;
    std::vector<CellField> basis;
    basis.reserve(static_cast<std::size_t>(k_max) + 1);
    std::vector<double> h(static_cast<std::size_t>((k_max + 1) * k_max));
    auto H = [&](int row, int col) -> double& { return h[static_cast<std::size_t>(row * k_max + col)]; };
    std::vector<double> cs(static_cast<std::size_t>(k_max)), sn(static_cast<std::size_t>(k_max));
    std::vector<double> g(static_cast<std::size_t>(k_max) + 1);

    for (int cycle = 0; cycle < settings.max_restarts; ++cycle) {
        basis.clear();
        std::fill(h.begin(), h.end(), 0.0);
        std::fill(g.begin(), g.end(), 0.0);
        basis.push_back((1.0 / beta) * r);
        g[0] = beta;

        int used = 0;
        for (int j = 0; j < k_max; ++j) {
            CellField w = apply(precond(basis[static_cast<std::size_t>(j)]));
            ++result.iterations;
            for (int i = 0; i <= j; ++i) {
                H(i, j) = dot(w, basis[static_cast<std::size_t>(i)]);
                w.axpy(-H(i, j), basis[static_cast<std::size_t>(i)]);
            }
            const double w_norm = norm2(w);
            H(j + 1, j) = w_norm;

            for (int i = 0; i < j; ++i) {
                const double a = H(i, j), b = H(i + 1, j);
                H(i, j) = cs[i] * a + sn[i] * b;
                H(i + 1, j) = -sn[i] * a + cs[i] * b;
            }
            const double denom = std::hypot(H(j, j), H(j + 1, j));
            cs[j] = denom == 0.0 ? 1.0 : H(j, j) / denom;
            sn[j] = denom == 0.0 ? 0.0 : H(j + 1, j) / denom;
            H(j, j) = denom;
            H(j + 1, j) = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            used = j + 1;

            if (std::fabs(g[j + 1]) <= settings.tol * rhs_norm || w_norm == 0.0) break;
            basis.push_back((1.0 / w_norm) * w);
        }

        // Back substitution for the least-squares coefficients.
        std::vector<double> y(static_cast<std::size_t>(used));
        for (int i = used - 1; i >= 0; --i) {
            double acc = g[i];
            for (int k = i + 1; k < used; ++k) acc -= H(i, k) * y[k];
            y[i] = H(i, i) == 0.0 ? 0.0 : acc / H(i, i);
        }
        CellField update(geom);
        for (int i = 0; i < used; ++i) update.axpy(y[i], basis[static_cast<std::size_t>(i)]);
        result.x += precond(update);

        r = rhs - apply(result.x);
        beta = norm2(r);
        result.relative_residual = beta / rhs_norm;
        if (result.relative_residual <= settings.tol) return result;
        if (beta == 0.0) return result;
    }
    throw GmresError(std::move(result));
}

struct StepSolveReport {
    int newton_iters = 0;
    int total_gmres_iters = 0;
    double final_step_norm = 0.0;      ///< max-norm of the last Newton direction
    double final_residual_norm = 0.0;  ///< max-norm of the scheme residual at the returned state
    int damping_events = 0;            ///< Newton iterations that needed a step shorter than 1
};

/// Common base of the per-step solver failures; the report covers the iterations done.
class StepSolveError : public std::runtime_error {
public:
    StepSolveError(const std::string& what, StepSolveReport report)
        : std::runtime_error(what), report_(report) {}
    const StepSolveReport& report() const noexcept { return report_; }

private:
    StepSolveReport report_;
};

class NewtonMaxIterations : public StepSolveError {
public:
    using StepSolveError::StepSolveError;
};

class DampingFloorReached : public StepSolveError {
public:
    using StepSolveError::StepSolveError;
};

class LinearSolveFailure : public StepSolveError {
public:
    LinearSolveFailure(const std::string& what, StepSolveReport report, double achieved)
        : StepSolveError(what, report), achieved_(achieved) {}
    double achieved_residual() const noexcept { return achieved_; }

private:
    double achieved_;
};

/**
 * @brief One step of the convex-splitting scheme,
 *   phi - phi_prev = s Lap_h (dFc(phi) - dFe(phi_prev)) + s eps xi.
 *
 * The explicit part dFe(phi_prev) is evaluated once on construction.
 */
class StepProblem {
public:
    StepProblem(CellField phi_prev, double s, double epsilon, const CellField* xi, const ModelParams& p)
        : phi_prev_(std::move(phi_prev)), s_(s), params_(p), expansive_(var_deriv_Fe(phi_prev_, p)),
          forcing_(phi_prev_.geometry()) {
        if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("time step must be positive");
        require_in_domain(phi_prev_, p);
        if (epsilon != 0.0 && xi != nullptr) {
            phi_prev_.check_same(*xi);
            forcing_.axpy(s * epsilon, *xi);
        }
    }

    const CellField& previous() const noexcept { return phi_prev_; }
    double step() const noexcept { return s_; }
    const ModelParams& params() const noexcept { return params_; }

    /// dFc(phi) - dFe(phi_prev)
    CellField chemical_potential(const CellField& phi) const { return var_deriv_Fc(phi, params_) - expansive_; }

    CellField residual(const CellField& phi) const {
        CellField r = phi - phi_prev_;
        r.axpy(-s_, laplacian(chemical_potential(phi)));
        r -= forcing_;
        return r;
    }

    /// Jacobian of the residual at phi, applied matrix-free.
    class Jacobian {
    public:
        Jacobian(const CellField& phi, double s, const ModelParams& p) : hess_(phi, p), s_(s) {}
        CellField operator()(const CellField& psi) const {
            CellField out = psi;
            out.axpy(-s_, laplacian(hess_.apply(psi)));
            return out;
        }

    private:
        HessianOperator hess_;
        double s_;
    };

    Jacobian jacobian(const CellField& phi) const { return Jacobian(phi, s_, params_); }

private:
    CellField phi_prev_;
    double s_;
    ModelParams params_;
    CellField expansive_;
    CellField forcing_;  ///< s eps xi
};

inline CellField residual(const CellField& phi, const CellField& phi_prev, double s, double epsilon,
                          const CellField& xi, const ModelParams& p) {
    return StepProblem(phi_prev, s, epsilon, &xi, p).residual(phi);
}

/// psi - s Lap_h(H(phi) psi)
inline CellField newton_operator(const CellField& phi, const CellField& psi, double s, const ModelParams& p) {
    return StepProblem::Jacobian(phi, s, p)(psi);
}

struct StepSolution {
    CellField phi;
    StepSolveReport report;
};

/**
 * @brief Damped Newton iteration with GMRES inner solves.
 *
 * Starts from `start` (phi_prev when absent). Each direction p solves
 * J(x) p = -R(x); the step length halves until x + lambda p stays in the
 * admissible interval. Converged when ||p||_inf < tol_newton.
 */
inline StepSolution newton_solve(const StepProblem& problem, const NewtonSettings& settings,
                                 const std::optional<CellField>& start = std::nullopt) {
    settings.validate();
    const ModelParams& p = problem.params();
    const ScalarEnergyFns fns(p);
    CellField x = start ? *start : problem.previous();
    require_in_domain(x, p);
    StepSolveReport report;
    const GmresSettings gs = settings.gmres();

    for (int l = 0; l < settings.max_newton_iters; ++l) {
        CellField r = problem.residual(x);
        require_finite(r, "Newton residual");
        r *= -1.0;
        GmresResult lin;
        try {
            lin = gmres(problem.jacobian(x), r, gs);
        } catch (const GmresError& e) {
            report.total_gmres_iters += e.best().iterations;
            throw LinearSolveFailure(e.what(), report, e.best().relative_residual);
        }
        report.total_gmres_iters += lin.iterations;
        report.newton_iters = l + 1;
        const CellField& dir = lin.x;

        double lambda = 1.0;
        CellField trial = x;
        for (;;) {
            trial = x;
            trial.axpy(lambda, dir);
            bool ok = true;
            for (double v : trial.values()) {
                if (!fns.in_domain(v)) {
                    ok = false;
                    break;
                }
            }
            if (ok) break;
            lambda *= 0.5;
            if (lambda < settings.min_damping)
                throw DampingFloorReached("Newton damping fell below the floor", report);
        }
        if (lambda < 1.0) ++report.damping_events;
        x = std::move(trial);
        report.final_step_norm = norm_inf(dir);
        if (report.final_step_norm < settings.tol_newton) {
            report.final_residual_norm = norm_inf(problem.residual(x));
            return {std::move(x), report};
        }
    }
    report.final_residual_norm = norm_inf(problem.residual(x));
    throw NewtonMaxIterations("Newton iteration limit reached", report);
}

inline StepSolution newton_solve(const CellField& phi_prev, double s, double epsilon, const CellField* xi,
                                 const ModelParams& p, const NewtonSettings& settings) {
    return newton_solve(StepProblem(phi_prev, s, epsilon, xi, p), settings);
}

}  // namespace mmcpf
