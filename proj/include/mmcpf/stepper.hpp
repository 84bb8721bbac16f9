#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"
#include "energy.hpp"
#include "grid.hpp"
#include "noise.hpp"
#include "solver.hpp"

namespace mmcpf {

/// Per-step ledger entry. Record 0 describes the initial state (s = 0, no solve).
struct StepRecord {
    int k = 0;
    double t = 0.0;
    double s = 0.0;  ///< step that produced this state
    double F = 0.0;
    double Fc = 0.0;
    double Fe = 0.0;
    double Uprime = 0.0;
    double Udoubleprime = 0.0;
    double alpha = 0.0;  ///< alpha_k used to pick the next step; 0 in constant mode
    int regime = 1;
    int newton_iters = 0;
    int gmres_iters = 0;
    int damping_events = 0;
    double final_step_norm = 0.0;
    double final_residual_norm = 0.0;
    double mass = 0.0;  ///< mean concentration
};

struct Snapshot {
    double scheduled_time = 0.0;
    int k = 0;
    double t = 0.0;
    CellField phi;
};

struct Trajectory {
    std::vector<StepRecord> records;
    std::vector<Snapshot> snapshots;
    CellField final_state;
    std::uint64_t sample = 0;
};

/// A run aborted. The trajectory holds every record completed before the failure.
class RunError : public std::runtime_error {
public:
    RunError(std::string kind, const std::string& what, Trajectory partial)
        : std::runtime_error(what), kind_(std::move(kind)), partial_(std::move(partial)) {}

    const std::string& kind() const noexcept { return kind_; }
    const Trajectory& partial() const noexcept { return partial_; }

private:
    std::string kind_;
    Trajectory partial_;
};

/// U' = -([Dx mu, Dx mu]_ew + [Dy mu, Dy mu]_ns), the discrete -||grad mu||^2.
inline double energy_derivative(const CellField& mu) {
    const EdgeFieldEW gx = Dx(mu);
    const EdgeFieldNS gy = Dy(mu);
    return -(inner_ew(gx, gx) + inner_ns(gy, gy));
}

/// Backward difference of U'.
inline double second_derivative(double uprime_k, double uprime_prev, double s_k) {
    return (uprime_k - uprime_prev) / s_k;
}

inline double alpha_k(double udoubleprime, const TimeStepPolicy& policy) {
    return udoubleprime >= 0.0 ? policy.alpha_min : policy.alpha_min - policy.A * udoubleprime;
}

inline double next_step_size(double uprime, double alpha, const TimeStepPolicy& policy) {
    const double s = policy.s_max / std::sqrt(1.0 + alpha * uprime * uprime);
    return std::clamp(std::max(policy.s_min, s), policy.s_min, policy.s_max);
}

/**
 * @brief Two-regime controller for alpha_k.
 *
 * Regime 1 uses the curvature rule. Regime 2 (alpha fixed to alpha_regime2)
 * latches the first time |U'| falls below the threshold after having been at
 * or above it, i.e. once the sharp energy decay is over. It never reverts.
 */
class AdaptiveController {
public:
    explicit AdaptiveController(const TimeStepPolicy& policy) : policy_(policy) {}

    /// Feeds U'(t_k), U''(t_k); returns alpha_k.
    double observe(double uprime, double udoubleprime) {
        const double mag = std::fabs(uprime);
        if (!relaxed_) {
            if (mag >= policy_.switch_threshold) {
                exceeded_ = true;
            } else if (exceeded_) {
                relaxed_ = true;
                ++switches_;
            }
        }
        return relaxed_ ? policy_.alpha_regime2 : alpha_k(udoubleprime, policy_);
    }

    int regime() const noexcept { return relaxed_ ? 2 : 1; }
    int switches() const noexcept { return switches_; }

private:
    TimeStepPolicy policy_;
    bool exceeded_ = false;
    bool relaxed_ = false;
    int switches_ = 0;
};

/// Lineage slot reserved for initial data; noise uses sample indices < 2^63.
inline constexpr std::uint64_t kInitialDataStream = ~std::uint64_t{0};

/// Base value plus an i.i.d. uniform disturbance on [-amplitude, amplitude] per cell.
inline CellField initial_field(const GridGeometry& geom, const InitialCondition& ic, std::uint64_t seed) {
    if (ic.kind == InitialKind::uniform) return CellField(geom, ic.base);
    const CounterRng rng(CounterRng::key_for({seed, kInitialDataStream, kInitialDataStream}, 2));
    CellField out(geom);
    auto v = out.values();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = ic.base + ic.amplitude * (2.0 * rng.uniform(k) - 1.0);
    return out;
}

/// Cell-center subsampling: coarse cell (i, j) takes fine cell (i * m_f/m_c, j * n_f/n_c).
inline CellField restrict_to(const CellField& fine, const GridGeometry& coarse) {
    const GridGeometry& fg = fine.geometry();
    if (fg.m % coarse.m != 0 || fg.n % coarse.n != 0)
        throw ValidationError("mesh_study.sizes", "coarse cell counts must divide the finest grid's");
    if (fg.Lx != coarse.Lx || fg.Ly != coarse.Ly) throw GeometryMismatch("restriction across different domains");
    const int rx = fg.m / coarse.m, ry = fg.n / coarse.n;
    return CellField::generate(coarse, [&](int i, int j) { return fine(i * rx, j * ry); });
}

/// Piecewise-constant injection of a coarse field onto a nested finer grid.
inline CellField prolong_to(const CellField& coarse, const GridGeometry& fine) {
    const GridGeometry& cg = coarse.geometry();
    if (fine.m % cg.m != 0 || fine.n % cg.n != 0)
        throw ValidationError("mesh_study.sizes", "fine cell counts must be multiples of the coarse grid's");
    if (fine.Lx != cg.Lx || fine.Ly != cg.Ly) throw GeometryMismatch("prolongation across different domains");
    const int rx = fine.m / cg.m, ry = fine.n / cg.n;
    return CellField::generate(fine, [&](int i, int j) { return coarse(i / rx, j / ry); });
}

/// Mean of the fine cells covering each coarse cell.
inline CellField block_average(const CellField& fine, const GridGeometry& coarse) {
    const GridGeometry& fg = fine.geometry();
    if (fg.m % coarse.m != 0 || fg.n % coarse.n != 0)
        throw ValidationError("mesh_study.sizes", "coarse cell counts must divide the finest grid's");
    if (fg.Lx != coarse.Lx || fg.Ly != coarse.Ly) throw GeometryMismatch("averaging across different domains");
    const int rx = fg.m / coarse.m, ry = fg.n / coarse.n;
    return CellField::generate(coarse, [&](int i, int j) {
        CompensatedSum acc;
        for (int a = 0; a < rx; ++a)
            for (int b = 0; b < ry; ++b) acc += fine(i * rx + a, j * ry + b);
        return acc.value() / (rx * ry);
    });
}

/// Discrete L2 distance along the row j = n/2 of the coarser grid, finer field block-averaged.
inline double midline_difference(const CellField& coarse, const CellField& fine) {
    const GridGeometry& g = coarse.geometry();
    const CellField avg = block_average(fine, g);
    const int j = g.n / 2;
    CompensatedSum acc;
    for (int i = 0; i < g.m; ++i) {
        const double d = coarse(i, j) - avg(i, j);
        acc += d * d;
    }
    return std::sqrt(acc.value() * g.hx());
}

struct RunOptions {
    std::uint64_t sample = 0;
    /// Called after each completed record; used for progress reporting.
    std::function<void(const StepRecord&)> on_record;
};

namespace detail {
inline bool reached(double t, double target) { return t >= target - 1e-9 * std::max(1.0, std::fabs(target)); }
}  // namespace detail

/**
 * @brief Integrates from phi0 at t = 0 to the configured end time.
 *
 * Deterministic runs abort if F rises by more than 1e-10 max(1, |F|) in one
 * step. Noise lineage is (seed, sample, k) for the step leaving t_k.
 */
inline Trajectory run(const RunConfig& config, const CellField& phi0, const RunOptions& options = {}) {
    config.validate();
    const ModelParams p = config.model();
    const TimeStepPolicy& policy = config.time;
    const bool adaptive = policy.mode == StepMode::adaptive;
    const bool stochastic = p.epsilon > 0.0;
    require_in_domain(phi0, p);

    Trajectory traj;
    traj.sample = options.sample;
    std::vector<double> schedule = config.snapshot_times;
    std::sort(schedule.begin(), schedule.end());
    std::size_t next_snap = 0;

    auto take_snapshots = [&](const CellField& phi, int k, double t) {
        while (next_snap < schedule.size() && detail::reached(t, schedule[next_snap])) {
            traj.snapshots.push_back({schedule[next_snap], k, t, phi});
            ++next_snap;
        }
    };

    AdaptiveController controller(policy);
    CellField phi = phi0;
    double t = 0.0;

    StepRecord rec;
    {
        const EnergyReport e = discrete_energy(phi, p);
        rec.F = e.F;
        rec.Fc = e.Fc;
        rec.Fe = e.Fe;
        rec.Uprime = energy_derivative(var_deriv_Fc(phi, p) - var_deriv_Fe(phi, p));
        rec.Udoubleprime = 0.0;
        rec.alpha = adaptive ? controller.observe(rec.Uprime, 0.0) : 0.0;
        rec.regime = controller.regime();
        rec.mass = mean(phi);
    }
    traj.records.push_back(rec);
    if (options.on_record) options.on_record(rec);
    take_snapshots(phi, 0, t);

    double s_next = adaptive ? next_step_size(rec.Uprime, rec.alpha, policy) : policy.s_const;
    int k = 0;
    while (!detail::reached(t, config.T)) {
        const double s = s_next;
        const StepRecord prev = traj.records.back();
        std::optional<CellField> xi;
        if (stochastic) xi = sample_noise(phi.geometry(), s, {config.seed, options.sample, static_cast<std::uint64_t>(k)});

        StepSolution sol;
        try {
            const StepProblem problem(phi, s, p.epsilon, xi ? &*xi : nullptr, p);
            sol = newton_solve(problem, config.solver);
            const CellField mu = problem.chemical_potential(sol.phi);
            rec = StepRecord{};
            rec.Uprime = energy_derivative(mu);
        } catch (const NewtonMaxIterations& e) {
            traj.final_state = phi;
            throw RunError("newton_max_iterations", "step " + std::to_string(k + 1) + ": " + e.what(), std::move(traj));
        } catch (const DampingFloorReached& e) {
            traj.final_state = phi;
            throw RunError("damping_floor", "step " + std::to_string(k + 1) + ": " + e.what(), std::move(traj));
        } catch (const LinearSolveFailure& e) {
            traj.final_state = phi;
            throw RunError("gmres_failure", "step " + std::to_string(k + 1) + ": " + e.what(), std::move(traj));
        } catch (const DomainError& e) {
            traj.final_state = phi;
            throw RunError("domain", "step " + std::to_string(k + 1) + ": " + e.what(), std::move(traj));
        }

        ++k;
        t += s;
        phi = std::move(sol.phi);
        const EnergyReport e = discrete_energy(phi, p);
        rec.k = k;
        rec.t = t;
        rec.s = s;
        rec.F = e.F;
        rec.Fc = e.Fc;
        rec.Fe = e.Fe;
        rec.Udoubleprime = second_derivative(rec.Uprime, prev.Uprime, s);
        rec.newton_iters = sol.report.newton_iters;
        rec.gmres_iters = sol.report.total_gmres_iters;
        rec.damping_events = sol.report.damping_events;
        rec.final_step_norm = sol.report.final_step_norm;
        rec.final_residual_norm = sol.report.final_residual_norm;
        rec.mass = mean(phi);
        if (adaptive) {
            rec.alpha = controller.observe(rec.Uprime, rec.Udoubleprime);
            s_next = next_step_size(rec.Uprime, rec.alpha, policy);
        }
        rec.regime = controller.regime();
        traj.records.push_back(rec);
        if (options.on_record) options.on_record(rec);
        take_snapshots(phi, k, t);

        if (!stochastic && rec.F > prev.F + 1e-10 * std::max(1.0, std::fabs(prev.F))) {
            traj.final_state = phi;
            throw RunError("energy_increase", "step " + std::to_string(k) + ": discrete energy increased", std::move(traj));
        }
    }
    traj.final_state = std::move(phi);
    return traj;
}

inline Trajectory run(const RunConfig& config, const RunOptions& options = {}) {
    return run(config, initial_field(config.geometry(), config.initial, config.seed), options);
}

struct EnsembleResult {
    std::vector<Trajectory> samples;
    std::vector<double> times;
    std::vector<double> mean_F;
};

class EnsembleError : public std::runtime_error {
public:
    EnsembleError(std::uint64_t sample, const std::string& what)
        : std::runtime_error("sample " + std::to_string(sample) + ": " + what), sample_(sample) {}
    std::uint64_t sample() const noexcept { return sample_; }

private:
    std::uint64_t sample_;
};

/**
 * @brief Runs n_samples trajectories from a shared initial field, each with its
 * own noise lineage, and averages F pointwise in time. Results do not depend on
 * the number of worker threads.
 */
inline EnsembleResult run_ensemble(const RunConfig& config, int n_samples, unsigned jobs = 0) {
    config.validate();
    if (n_samples < 1) throw ValidationError("run.n_samples", "must be at least 1");
    if (config.time.mode != StepMode::constant)
        throw ValidationError("time.mode", "ensembles require uniform time steps");
    const CellField phi0 = initial_field(config.geometry(), config.initial, config.seed);

    EnsembleResult out;
    out.samples.resize(static_cast<std::size_t>(n_samples));
    std::vector<std::string> errors(static_cast<std::size_t>(n_samples));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int idx = next++; idx < n_samples; idx = next++) {
            try {
                RunOptions opt;
                opt.sample = static_cast<std::uint64_t>(idx);
                out.samples[static_cast<std::size_t>(idx)] = run(config, phi0, opt);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(idx)] = e.what();
            }
        }
    };
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(n_samples));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(worker);
    }
    for (int idx = 0; idx < n_samples; ++idx)
        if (!errors[static_cast<std::size_t>(idx)].empty())
            throw EnsembleError(static_cast<std::uint64_t>(idx), errors[static_cast<std::size_t>(idx)]);

    const std::size_t len = out.samples.front().records.size();
    for (const auto& tr : out.samples)
        if (tr.records.size() != len) throw std::logic_error("ensemble members have different step counts");
    out.times.resize(len);
    out.mean_F.resize(len);
    for (std::size_t r = 0; r < len; ++r) {
        CompensatedSum acc;
        for (const auto& tr : out.samples) acc += tr.records[r].F;
        out.times[r] = out.samples.front().records[r].t;
        out.mean_F[r] = acc.value() / n_samples;
    }
    return out;
}

struct MeshStudyResult {
    std::vector<GridGeometry> grids;
    std::vector<Trajectory> runs;
};

/**
 * @brief Repeats a run over several nested grids from one shared initial field.
 *
 * Every run starts from one field on the finest grid, restricted to its own
 * grid by subsampling. By default the disturbance is drawn cell-wise on the
 * coarsest grid and held piecewise constant on the finest one, so all runs
 * see the same function of x and y. With DisturbanceGrid::finest it is drawn
 * cell-wise on the finest grid instead.
 */
inline MeshStudyResult run_mesh_study(const RunConfig& config) {
    config.validate();
    std::vector<std::pair<int, int>> sizes = config.mesh_sizes;
    if (sizes.empty()) sizes.emplace_back(config.m, config.n);
    auto cells = [](const auto& a) { return static_cast<long>(a.first) * a.second; };
    const auto finest = *std::max_element(sizes.begin(), sizes.end(),
                                          [&](const auto& a, const auto& b) { return cells(a) < cells(b); });
    const auto coarsest = *std::min_element(sizes.begin(), sizes.end(),
                                            [&](const auto& a, const auto& b) { return cells(a) < cells(b); });
    const GridGeometry fine_geom(config.Lx, config.Ly, finest.first, finest.second);
    const GridGeometry coarse_geom(config.Lx, config.Ly, coarsest.first, coarsest.second);
    const CellField fine = config.mesh_disturbance == DisturbanceGrid::finest
                               ? initial_field(fine_geom, config.initial, config.seed)
                               : prolong_to(initial_field(coarse_geom, config.initial, config.seed), fine_geom);

    MeshStudyResult out;
    for (const auto& [mm, nn] : sizes) {
        RunConfig c = config;
        c.m = mm;
        c.n = nn;
        const GridGeometry g = c.geometry();
        out.grids.push_back(g);
        out.runs.push_back(run(c, restrict_to(fine, g)));
    }
    return out;
}

}  // namespace mmcpf
