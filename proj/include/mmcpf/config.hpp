#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "params.hpp"
#include "solver.hpp"

namespace mmcpf {

enum class StepMode { constant, adaptive };

/**
 * @brief Time-step policy. In adaptive mode the step after t_k is
 * max{s_min, s_max / sqrt(1 + alpha_k U'(t_k)^2)}, with alpha_k switching from
 * the curvature rule to a fixed small value once the sharp decay is over.
 */
struct TimeStepPolicy {
    StepMode mode = StepMode::constant;
    double s_const = 1e-3;
    double s_min = 1e-3;
    double s_max = 0.1;
    double alpha_min = 1e5;
    double A = 1e6;
    double switch_threshold = 3.0;
    double alpha_regime2 = 100.0;

    void validate() const {
        if (mode == StepMode::constant && !(s_const > 0.0)) throw ValidationError("time.s", "must be positive");
        if (!(s_min > 0.0)) throw ValidationError("time.s_min", "must be positive");
        if (!(s_max >= s_min)) throw ValidationError("time.s_max", "must be at least s_min");
        if (!(alpha_min > 0.0)) throw ValidationError("time.alpha_min", "must be positive");
        if (!(A >= 0.0)) throw ValidationError("time.A", "must be nonnegative");
        if (!(switch_threshold > 0.0)) throw ValidationError("time.switch_threshold", "must be positive");
        if (!(alpha_regime2 > 0.0)) throw ValidationError("time.alpha_regime2", "must be positive");
    }
};

enum class InitialKind { disturbed_uniform, uniform };

/// Grid on which a mesh study draws its per-cell disturbance.
enum class DisturbanceGrid { coarsest, finest };

struct InitialCondition {
    InitialKind kind = InitialKind::disturbed_uniform;
    double base = 0.6;
    double amplitude = 0.15;  ///< half-width of the uniform disturbance
};

struct RunConfig {
    double chi = 2.37;
    double M = 0.16;
    double N = 4.34;
    double epsilon = 0.0;

    double Lx = 50.0;
    double Ly = 50.0;
    int m = 64;
    int n = 64;

    TimeStepPolicy time;
    double T = 1.0;

    InitialCondition initial;
    NewtonSettings solver;

    std::uint64_t seed = 0;
    int n_samples = 1;
    std::vector<double> snapshot_times;
    std::string output_dir;

    /// Grids for mesh studies; empty means only (m, n).
    std::vector<std::pair<int, int>> mesh_sizes;
    DisturbanceGrid mesh_disturbance = DisturbanceGrid::coarsest;

    ModelParams model() const { return derive_params(M, N, chi, epsilon); }
    GridGeometry geometry() const { return GridGeometry(Lx, Ly, m, n); }

    void validate() const {
        const ModelParams p = model();
        (void)geometry();
        time.validate();
        solver.validate();
        if (!(T > 0.0)) throw ValidationError("time.T", "must be positive");
        if (time.mode == StepMode::adaptive && epsilon > 0.0)
            throw ValidationError("time.mode", "adaptive stepping unsupported with noise");
        if (n_samples < 1) throw ValidationError("run.n_samples", "must be at least 1");
        for (double t : snapshot_times)
            if (!(t >= 0.0)) throw ValidationError("run.snapshot_times", "entries must be nonnegative");
        const double lo = initial.base - (initial.kind == InitialKind::uniform ? 0.0 : initial.amplitude);
        const double hi = initial.base + (initial.kind == InitialKind::uniform ? 0.0 : initial.amplitude);
        if (initial.amplitude < 0.0) throw ValidationError("initial.amplitude", "must be nonnegative");
        if (!(lo > 0.0 && hi < 1.0 / p.rho))
            throw ValidationError("initial.base", "initial values must stay inside (0, 1/rho)");
        for (const auto& [mm, nn] : mesh_sizes) {
            if (mm < 2 || nn < 2) throw ValidationError("mesh_study.sizes", "cell counts must be at least 2");
        }
    }
};

/// Error raised for malformed or invalid configuration files.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0) : std::runtime_error(what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::string& block,
                           std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError("'" + block + "' must be an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown key '" + (block.empty() ? key : block + "." + key) + "'");
    }
}

template <class T>
void read(const nlohmann::json& obj, const char* key, T& out, const std::string& block) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("'" + block + "." + key + "' has the wrong type");
    }
}

inline int line_of_offset(const std::string& text, std::size_t offset) {
    int line = 1;
    for (std::size_t k = 0; k < offset && k < text.size(); ++k)
        if (text[k] == '\n') ++line;
    return line;
}

}  // namespace detail

/**
 * Builds a validated RunConfig from JSON. The top-level object holds the
 * blocks `model`, `grid`, `time` (required) and `initial`, `solver`, `run`,
 * `mesh_study` (optional). A run manifest, whose `config` member holds a
 * resolved configuration, is accepted as well.
 */
inline RunConfig config_from_json(const nlohmann::json& root_in) {
    const nlohmann::json& root = (root_in.is_object() && root_in.contains("config") && root_in.contains("manifest_version"))
                                     ? root_in.at("config")
                                     : root_in;
    detail::reject_unknown(root, "", {"model", "grid", "time", "initial", "solver", "run", "mesh_study"});
    for (const char* required : {"model", "grid", "time"})
        if (!root.contains(required)) throw ConfigError(std::string("missing required block '") + required + "'");

    RunConfig c;
    const auto& model = root.at("model");
    detail::reject_unknown(model, "model", {"chi", "M", "N", "epsilon"});
    detail::read(model, "chi", c.chi, "model");
    detail::read(model, "M", c.M, "model");
    detail::read(model, "N", c.N, "model");
    detail::read(model, "epsilon", c.epsilon, "model");

    const auto& grid = root.at("grid");
    detail::reject_unknown(grid, "grid", {"Lx", "Ly", "m", "n"});
    detail::read(grid, "Lx", c.Lx, "grid");
    detail::read(grid, "Ly", c.Ly, "grid");
    detail::read(grid, "m", c.m, "grid");
    detail::read(grid, "n", c.n, "grid");

    const auto& time = root.at("time");
    detail::reject_unknown(time, "time",
                           {"mode", "s", "s_min", "s_max", "alpha_min", "A", "switch_threshold", "alpha_regime2", "T"});
    if (!time.contains("T")) throw ConfigError("missing required key 'time.T'");
    std::string mode = "constant";
    detail::read(time, "mode", mode, "time");
    if (mode == "constant") {
        c.time.mode = StepMode::constant;
    } else if (mode == "adaptive") {
        c.time.mode = StepMode::adaptive;
    } else {
        throw ConfigError("'time.mode' must be \"constant\" or \"adaptive\"");
    }
    detail::read(time, "s", c.time.s_const, "time");
    detail::read(time, "s_min", c.time.s_min, "time");
    detail::read(time, "s_max", c.time.s_max, "time");
    detail::read(time, "alpha_min", c.time.alpha_min, "time");
    detail::read(time, "A", c.time.A, "time");
    detail::read(time, "switch_threshold", c.time.switch_threshold, "time");
    detail::read(time, "alpha_regime2", c.time.alpha_regime2, "time");
    detail::read(time, "T", c.T, "time");

    if (root.contains("initial")) {
        const auto& init = root.at("initial");
        detail::reject_unknown(init, "initial", {"kind", "base", "amplitude"});
        std::string kind = "disturbed_uniform";
        detail::read(init, "kind", kind, "initial");
        if (kind == "disturbed_uniform") {
            c.initial.kind = InitialKind::disturbed_uniform;
        } else if (kind == "uniform") {
            c.initial.kind = InitialKind::uniform;
            c.initial.base = 0.3;
        } else {
            throw ConfigError("'initial.kind' must be \"disturbed_uniform\" or \"uniform\"");
        }
        detail::read(init, "base", c.initial.base, "initial");
        detail::read(init, "amplitude", c.initial.amplitude, "initial");
    }

    if (root.contains("solver")) {
        const auto& s = root.at("solver");
        detail::reject_unknown(s, "solver", {"tol_newton", "max_newton", "tol_gmres", "restart", "max_restarts"});
        detail::read(s, "tol_newton", c.solver.tol_newton, "solver");
        detail::read(s, "max_newton", c.solver.max_newton_iters, "solver");
        detail::read(s, "tol_gmres", c.solver.tol_gmres, "solver");
        detail::read(s, "restart", c.solver.gmres_restart, "solver");
        detail::read(s, "max_restarts", c.solver.max_gmres_restarts, "solver");
    }

    if (root.contains("run")) {
        const auto& r = root.at("run");
        detail::reject_unknown(r, "run", {"seed", "n_samples", "snapshot_times", "output_dir"});
        detail::read(r, "seed", c.seed, "run");
        detail::read(r, "n_samples", c.n_samples, "run");
        detail::read(r, "snapshot_times", c.snapshot_times, "run");
        detail::read(r, "output_dir", c.output_dir, "run");
    }

    if (root.contains("mesh_study")) {
        const auto& ms = root.at("mesh_study");
        detail::reject_unknown(ms, "mesh_study", {"sizes", "disturbance_grid"});
        std::vector<std::vector<int>> sizes;
        detail::read(ms, "sizes", sizes, "mesh_study");
        for (const auto& s : sizes) {
            if (s.size() != 2) throw ConfigError("'mesh_study.sizes' entries must be [m, n] pairs");
            c.mesh_sizes.emplace_back(s[0], s[1]);
        }
        std::string where = "coarsest";
        detail::read(ms, "disturbance_grid", where, "mesh_study");
        if (where == "coarsest") {
            c.mesh_disturbance = DisturbanceGrid::coarsest;
        } else if (where == "finest") {
            c.mesh_disturbance = DisturbanceGrid::finest;
        } else {
            throw ConfigError("'mesh_study.disturbance_grid' must be \"coarsest\" or \"finest\"");
        }
    }

    c.validate();
    return c;
}

inline RunConfig parse_config_text(const std::string& text) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const int line = detail::line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ConfigError("parse error at line " + std::to_string(line) + ": " + e.what(), line);
    }
    return config_from_json(root);
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Fully resolved configuration, every default spelled out.
inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["model"] = {{"chi", c.chi}, {"M", c.M}, {"N", c.N}, {"epsilon", c.epsilon}};
    j["grid"] = {{"Lx", c.Lx}, {"Ly", c.Ly}, {"m", c.m}, {"n", c.n}};
    j["time"] = {{"mode", c.time.mode == StepMode::adaptive ? "adaptive" : "constant"},
                 {"s", c.time.s_const},
                 {"s_min", c.time.s_min},
                 {"s_max", c.time.s_max},
                 {"alpha_min", c.time.alpha_min},
                 {"A", c.time.A},
                 {"switch_threshold", c.time.switch_threshold},
                 {"alpha_regime2", c.time.alpha_regime2},
                 {"T", c.T}};
    j["initial"] = {{"kind", c.initial.kind == InitialKind::uniform ? "uniform" : "disturbed_uniform"},
                    {"base", c.initial.base},
                    {"amplitude", c.initial.amplitude}};
    j["solver"] = {{"tol_newton", c.solver.tol_newton},
                   {"max_newton", c.solver.max_newton_iters},
                   {"tol_gmres", c.solver.tol_gmres},
                   {"restart", c.solver.gmres_restart},
                   {"max_restarts", c.solver.max_gmres_restarts}};
    j["run"] = {{"seed", c.seed},
                {"n_samples", c.n_samples},
                {"snapshot_times", c.snapshot_times},
                {"output_dir", c.output_dir}};
    nlohmann::json sizes = nlohmann::json::array();
    for (const auto& [mm, nn] : c.mesh_sizes) sizes.push_back({mm, nn});
    j["mesh_study"] = {{"sizes", sizes},
                       {"disturbance_grid", c.mesh_disturbance == DisturbanceGrid::finest ? "finest" : "coarsest"}};
    return j;
}

}  // namespace mmcpf
