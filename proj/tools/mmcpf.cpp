// Batch front-end: run, ensemble, mesh-study and check subcommands.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mmcpf/mmcpf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kSolverFailure = 3, kIoFailure = 4, kCheckFailure = 5 };

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string output_dir;
    bool quiet = false;
    unsigned jobs = 0;
};

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void error_line(const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

fs::path resolve_output_dir(const Options& opt, const mmcpf::RunConfig& cfg) {
    if (!opt.output_dir.empty()) return opt.output_dir;
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    if (const char* env = std::getenv("MMCPF_OUTPUT_DIR"); env && *env) return env;
    return "mmcpf-out";
}

class Manifest {
public:
    Manifest(std::string subcommand, const mmcpf::RunConfig& cfg) {
        doc_["manifest_version"] = 1;
        doc_["subcommand"] = std::move(subcommand);
        doc_["code_version"] = mmcpf::kVersion;
        doc_["rng"] = {{"generator", mmcpf::kNoiseGeneratorId},
                       {"initial_data", "uniform disturbance from the same counter generator, stream ~0"}};
        doc_["config"] = mmcpf::config_to_json(cfg);
        doc_["started_at"] = utc_now();
        doc_["outputs"] = json::array();
    }

    void add_output(const std::string& rel) { doc_["outputs"].push_back(rel); }

    void finish(const fs::path& dir, const std::string& status, const std::string& message = {}) {
        doc_["finished_at"] = utc_now();
        doc_["status"] = status;
        if (!message.empty()) doc_["message"] = message;
        mmcpf::write_manifest(doc_, dir / "manifest.json");
    }

private:
    json doc_;
};

void write_trajectory(const mmcpf::Trajectory& traj, const fs::path& dir, const std::string& prefix,
                      const mmcpf::ModelParams& p, Manifest& manifest) {
    mmcpf::write_energy_csv(traj, dir / prefix / "energy.csv");
    manifest.add_output((fs::path(prefix) / "energy.csv").string());
    mmcpf::atomic_write(dir / prefix / "ledger.csv", mmcpf::ledger_csv(traj));
    manifest.add_output((fs::path(prefix) / "ledger.csv").string());
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
        const auto& snap = traj.snapshots[k];
        std::ostringstream name;
        name << "snapshot_" << std::setw(3) << std::setfill('0') << k;
        const fs::path rel = fs::path(prefix) / "snapshots" / name.str();
        mmcpf::write_snapshot(snap.phi, snap.t, dir / (rel.string() + ".csv"), dir / (rel.string() + ".pgm"),
                              p.phi_max());
        manifest.add_output(rel.string() + ".csv");
        manifest.add_output(rel.string() + ".pgm");
    }
}

mmcpf::RunConfig load(const Options& opt) {
    mmcpf::RunConfig cfg = mmcpf::parse_config(opt.config_path);
    if (opt.seed) cfg.seed = *opt.seed;
    return cfg;
}

std::function<void(const mmcpf::StepRecord&)> progress(const Options& opt, const std::string& label) {
    if (opt.quiet) return {};
    return [label](const mmcpf::StepRecord& r) {
        if (r.k % 100 == 0)
            std::cerr << label << "k=" << r.k << " t=" << r.t << " F=" << std::setprecision(12) << r.F
                      << " U'=" << r.Uprime << '\n';
    };
}

int cmd_run(const Options& opt) {
    const mmcpf::RunConfig cfg = load(opt);
    const fs::path dir = resolve_output_dir(opt, cfg);
    const mmcpf::ModelParams p = cfg.model();
    Manifest manifest("run", cfg);
    mmcpf::RunOptions ro;
    ro.on_record = progress(opt, "");
    try {
        const mmcpf::Trajectory traj = mmcpf::run(cfg, ro);
        write_trajectory(traj, dir, "", p, manifest);
        manifest.finish(dir, "ok");
    } catch (const mmcpf::RunError& e) {
        write_trajectory(e.partial(), dir, "", p, manifest);
        manifest.finish(dir, e.kind(), e.what());
        error_line(e.kind(), e.what());
        return kSolverFailure;
    }
    if (!opt.quiet) std::cerr << "wrote " << dir.string() << '\n';
    return kOk;
}

int cmd_ensemble(const Options& opt) {
    const mmcpf::RunConfig cfg = load(opt);
    const fs::path dir = resolve_output_dir(opt, cfg);
    const mmcpf::ModelParams p = cfg.model();
    Manifest manifest("ensemble", cfg);
    try {
        const mmcpf::EnsembleResult ens = mmcpf::run_ensemble(cfg, cfg.n_samples, opt.jobs);
        for (std::size_t s = 0; s < ens.samples.size(); ++s) {
            std::ostringstream name;
            name << "sample_" << std::setw(3) << std::setfill('0') << s;
            write_trajectory(ens.samples[s], dir, name.str(), p, manifest);
        }
        mmcpf::atomic_write(dir / "mean_energy.csv", mmcpf::mean_energy_csv(ens));
        manifest.add_output("mean_energy.csv");
        manifest.finish(dir, "ok");
    } catch (const mmcpf::EnsembleError& e) {
        manifest.finish(dir, "sample_failure", e.what());
        error_line("sample_failure", e.what());
        return kSolverFailure;
    }
    if (!opt.quiet) std::cerr << "wrote " << dir.string() << '\n';
    return kOk;
}

int cmd_mesh_study(const Options& opt) {
    const mmcpf::RunConfig cfg = load(opt);
    const fs::path dir = resolve_output_dir(opt, cfg);
    const mmcpf::ModelParams p = cfg.model();
    Manifest manifest("mesh-study", cfg);
    try {
        const mmcpf::MeshStudyResult study = mmcpf::run_mesh_study(cfg);
        for (std::size_t r = 0; r < study.runs.size(); ++r) {
            const std::string name = "mesh_" + std::to_string(study.grids[r].m) + "x" + std::to_string(study.grids[r].n);
            write_trajectory(study.runs[r], dir, name, p, manifest);
            mmcpf::atomic_write(dir / name / "final.csv", mmcpf::snapshot_csv(study.runs[r].final_state,
                                                                               study.runs[r].records.back().t));
            manifest.add_output(name + "/final.csv");
        }
        manifest.finish(dir, "ok");
    } catch (const mmcpf::RunError& e) {
        manifest.finish(dir, e.kind(), e.what());
        error_line(e.kind(), e.what());
        return kSolverFailure;
    }
    if (!opt.quiet) std::cerr << "wrote " << dir.string() << '\n';
    return kOk;
}

int cmd_check(const Options& opt) {
    const mmcpf::RunConfig cfg = load(opt);
    const mmcpf::ModelParams p = cfg.model();
    const int cells = 8;
    const mmcpf::GridGeometry g(cfg.Lx * cells / cfg.m, cfg.Ly * cells / cfg.n, cells, cells);
    const auto results = mmcpf::run_property_checks(p, g, cfg.seed);
    bool all = true;
    for (const auto& r : results) {
        all = all && r.passed;
        if (!opt.quiet || !r.passed)
            std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  measured=" << r.measured
                      << " tolerance=" << r.tolerance << '\n';
    }
    if (!all) {
        error_line("check_failed", "one or more invariants failed");
        return kCheckFailure;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    mmcpf::keep_heap_resident();
    CLI::App app{"Phase-field solver for the stochastic Cahn-Hilliard equation with reticular free energy"};
    app.require_subcommand(1);
    Options opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "Run configuration (JSON) or a run manifest")->required();
        sub->add_option("--seed", opt.seed, "Override run.seed");
        sub->add_option("--output-dir", opt.output_dir, "Output directory (default: config, $MMCPF_OUTPUT_DIR, ./mmcpf-out)");
        sub->add_flag("--quiet", opt.quiet, "Suppress progress output");
    };
    auto* run = app.add_subcommand("run", "Integrate a single trajectory");
    add_common(run);
    auto* ensemble = app.add_subcommand("ensemble", "Integrate run.n_samples stochastic trajectories and average F");
    add_common(ensemble);
    ensemble->add_option("--jobs", opt.jobs, "Worker threads (default: available cores)");
    auto* mesh = app.add_subcommand("mesh-study", "Repeat a run over mesh_study.sizes with shared initial data");
    add_common(mesh);
    auto* check = app.add_subcommand("check", "Run the discrete invariant checks on an 8x8 grid");
    add_common(check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (run->parsed()) return cmd_run(opt);
        if (ensemble->parsed()) return cmd_ensemble(opt);
        if (mesh->parsed()) return cmd_mesh_study(opt);
        if (check->parsed()) return cmd_check(opt);
    } catch (const mmcpf::ConfigError& e) {
        error_line("config", e.what());
        return kUsage;
    } catch (const mmcpf::ValidationError& e) {
        error_line("validation", e.what());
        return kUsage;
    } catch (const mmcpf::IoError& e) {
        error_line("io", e.what());
        return kIoFailure;
    } catch (const std::exception& e) {
        error_line("internal", e.what());
        return kSolverFailure;
    }
    return kUsage;
}
