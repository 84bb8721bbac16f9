#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "grid.hpp"
#include "stepper.hpp"

namespace mmcpf {

class IoError : public std::runtime_error {
public:
    IoError(const std::filesystem::path& path, const std::string& what)
        : std::runtime_error(path.string() + ": " + what), path_(path) {}
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    return v;
}

/// Writes to `path.tmp` and renames over `path`, so readers never see a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError(path.parent_path(), "cannot create directory: " + ec.message());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(tmp, "cannot open for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError(tmp, "write failed");
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError(path, "rename failed: " + ec.message());
}

inline std::string energy_csv(const Trajectory& traj) {
    std::string out = "k,t,s,F,Fc,Fe,Uprime,Udoubleprime,alpha,newton_iters,gmres_iters\n";
    for (const StepRecord& r : traj.records) {
        out += std::to_string(r.k) + ',' + format_double(r.t) + ',' + format_double(r.s) + ',' + format_double(r.F) +
               ',' + format_double(r.Fc) + ',' + format_double(r.Fe) + ',' + format_double(r.Uprime) + ',' +
               format_double(r.Udoubleprime) + ',' + format_double(r.alpha) + ',' + std::to_string(r.newton_iters) +
               ',' + std::to_string(r.gmres_iters) + '\n';
    }
    return out;
}

/// Solver-side ledger: convergence details and mass per step.
inline std::string ledger_csv(const Trajectory& traj) {
    std::string out = "k,t,s,regime,newton_iters,gmres_iters,damping_events,final_step_norm,final_residual_norm,mass\n";
    for (const StepRecord& r : traj.records) {
        out += std::to_string(r.k) + ',' + format_double(r.t) + ',' + format_double(r.s) + ',' +
               std::to_string(r.regime) + ',' + std::to_string(r.newton_iters) + ',' + std::to_string(r.gmres_iters) +
               ',' + std::to_string(r.damping_events) + ',' + format_double(r.final_step_norm) + ',' +
               format_double(r.final_residual_norm) + ',' + format_double(r.mass) + '\n';
    }
    return out;
}

inline std::string mean_energy_csv(const EnsembleResult& ens) {
    std::string out = "k,t,mean_F\n";
    for (std::size_t r = 0; r < ens.mean_F.size(); ++r)
        out += std::to_string(r) + ',' + format_double(ens.times[r]) + ',' + format_double(ens.mean_F[r]) + '\n';
    return out;
}

inline void write_energy_csv(const Trajectory& traj, const std::filesystem::path& path) {
    atomic_write(path, energy_csv(traj));
}

/**
 * Snapshot layout: one comment header line
 *   # t=<t>,Lx=<Lx>,Ly=<Ly>,m=<m>,n=<n>
 * followed by m rows (index i) of n comma-separated values (index j).
 */
inline std::string snapshot_csv(const CellField& phi, double t) {
    const GridGeometry& g = phi.geometry();
    std::string out = "# t=" + format_double(t) + ",Lx=" + format_double(g.Lx) + ",Ly=" + format_double(g.Ly) +
                      ",m=" + std::to_string(g.m) + ",n=" + std::to_string(g.n) + '\n';
    for (int i = 0; i < g.m; ++i) {
        for (int j = 0; j < g.n; ++j) {
            if (j) out += ',';
            out += format_double(phi(i, j));
        }
        out += '\n';
    }
    return out;
}

struct SnapshotData {
    CellField phi;
    double t = 0.0;
};

inline SnapshotData parse_snapshot_csv(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header) || header.rfind("# ", 0) != 0) throw std::invalid_argument("missing snapshot header");
    double t = 0, lx = 0, ly = 0;
    int m = 0, n = 0;
    std::istringstream hs(header.substr(2));
    std::string item;
    while (std::getline(hs, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("malformed snapshot header");
        const std::string key = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        if (key == "t") t = parse_double(val);
        else if (key == "Lx") lx = parse_double(val);
        else if (key == "Ly") ly = parse_double(val);
        else if (key == "m") m = std::stoi(val);
        else if (key == "n") n = std::stoi(val);
        else throw std::invalid_argument("unknown snapshot header key '" + key + "'");
    }
    CellField phi(GridGeometry(lx, ly, m, n));
    std::string line;
    for (int i = 0; i < m; ++i) {
        if (!std::getline(in, line)) throw std::invalid_argument("snapshot has too few rows");
        std::istringstream ls(line);
        std::string cell;
        for (int j = 0; j < n; ++j) {
            if (!std::getline(ls, cell, ',')) throw std::invalid_argument("snapshot row too short");
            phi(i, j) = parse_double(cell);
        }
    }
    return {std::move(phi), t};
}

inline SnapshotData read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_snapshot_csv(ss.str());
}

/// Binary 8-bit PGM, width m, height n, top row is the largest y. [0, upper] maps linearly onto [0, 255].
inline std::string graymap(const CellField& phi, double upper) {
    const GridGeometry& g = phi.geometry();
    std::string out = "P5\n" + std::to_string(g.m) + ' ' + std::to_string(g.n) + "\n255\n";
    for (int j = g.n - 1; j >= 0; --j) {
        for (int i = 0; i < g.m; ++i) {
            const double level = std::clamp(phi(i, j) / upper, 0.0, 1.0) * 255.0;
            out += static_cast<char>(static_cast<unsigned char>(std::lround(level)));
        }
    }
    return out;
}

inline void write_snapshot(const CellField& phi, double t, const std::filesystem::path& csv_path,
                           const std::filesystem::path& pgm_path, double upper) {
    atomic_write(csv_path, snapshot_csv(phi, t));
    atomic_write(pgm_path, graymap(phi, upper));
}

inline void write_manifest(const nlohmann::json& manifest, const std::filesystem::path& path) {
    atomic_write(path, manifest.dump(2) + '\n');
}

}  // namespace mmcpf
