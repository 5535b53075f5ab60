#include "splitflow/output.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace splitflow {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double cell_speed(const StructuredMesh& m, const FaceFluxField& u, int k) {
    double mag = 0.0;
    for (int a = 0; a < m.dim; ++a) {
        const double lo = u[m.cell_faces[k][2 * a]];
        const double hi = u[m.cell_faces[k][2 * a + 1]];
        const double c = 0.5 * (lo + hi);
        mag += c * c;
    }
    return std::sqrt(mag);
}

} // namespace

std::string snapshot_csv(const SimulationOutput& out, size_t snap_index) {
    const DecomposedDomain& dd = *out.domain;
    const auto& s = out.snapshot_s[snap_index];
    const bool has_p = !out.snapshot_p[snap_index].empty();
    std::ostringstream os;
    os << "cell,x,y,z,subdomain,codim,s,p,u_mag\n";
    int id = 0;
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        const StructuredMesh& m = dd.mesh(i);
        for (int k = 0; k < m.n_cells; ++k, ++id) {
            const auto c = m.cell_center(k);
            const double p = has_p ? out.snapshot_p[snap_index][i][k] : 0.0;
            const double umag =
                has_p ? cell_speed(m, out.snapshot_u[snap_index][i], k) : 0.0;
            os << id << "," << num(c[0]) << "," << num(c[1]) << "," << num(c[2])
               << "," << i << ",0," << num(s[i][k]) << "," << num(p) << ","
               << num(umag) << "\n";
        }
    }
    // codim-1 fracture rows, matched to the same snapshot time
    if (!out.fracture_s_at_coarse.empty()) {
        const double t = out.snapshot_times[snap_index];
        int nt = -1;
        for (size_t n = 0; n < out.coarse_times.size(); ++n)
            if (std::abs(out.coarse_times[n] - t) <=
                1e-9 * std::max(1.0, out.coarse_times.back()))
                nt = static_cast<int>(n);
        if (nt >= 0) {
            for (int c = 0; c < dd.n_mortar(); ++c, ++id) {
                const auto& ctr = dd.mortar()[c].centroid;
                os << id << "," << num(ctr[0]) << "," << num(ctr[1]) << ","
                   << num(ctr[2]) << ",-1,1,"
                   << num(out.fracture_s_at_coarse[nt][c]) << ",0,0\n";
            }
        }
    }
    return os.str();
}

std::string snapshot_vtk(const SimulationOutput& out, size_t snap_index) {
    const DecomposedDomain& dd = *out.domain;
    const auto& s = out.snapshot_s[snap_index];
    const bool has_p = !out.snapshot_p[snap_index].empty();
    std::ostringstream os;
    os << "# vtk DataFile Version 3.0\n";
    os << "two-phase flow snapshot t=" << num(out.snapshot_times[snap_index])
       << "\n";
    os << "ASCII\nDATASET UNSTRUCTURED_GRID\n";

    int n_cells = 0;
    for (int i = 0; i < dd.n_subdomains(); ++i) n_cells += dd.mesh(i).n_cells;
    const int dim = dd.mesh(0).dim;
    const int verts = dim == 2 ? 4 : 8;
    os << "POINTS " << n_cells * verts << " double\n";
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        const StructuredMesh& m = dd.mesh(i);
        for (int k = 0; k < m.n_cells; ++k) {
            const auto c = m.cell_center(k);
            const double hx = 0.5 * m.h[0], hy = 0.5 * m.h[1],
                         hz = dim == 3 ? 0.5 * m.h[2] : 0.0;
            if (dim == 2) {
                os << num(c[0] - hx) << " " << num(c[1] - hy) << " 0\n";
                os << num(c[0] + hx) << " " << num(c[1] - hy) << " 0\n";
                os << num(c[0] + hx) << " " << num(c[1] + hy) << " 0\n";
                os << num(c[0] - hx) << " " << num(c[1] + hy) << " 0\n";
            } else {
                for (int dz = -1; dz <= 1; dz += 2)
                    for (auto [dx, dy] : {std::pair{-1, -1}, std::pair{1, -1},
                                          std::pair{1, 1}, std::pair{-1, 1}})
                        os << num(c[0] + dx * hx) << " " << num(c[1] + dy * hy)
                           << " " << num(c[2] + dz * hz) << "\n";
            }
        }
    }
    os << "CELLS " << n_cells << " " << n_cells * (verts + 1) << "\n";
    for (int k = 0; k < n_cells; ++k) {
        os << verts;
        for (int v = 0; v < verts; ++v) os << " " << k * verts + v;
        os << "\n";
    }
    os << "CELL_TYPES " << n_cells << "\n";
    for (int k = 0; k < n_cells; ++k) os << (dim == 2 ? 9 : 12) << "\n";  // quad/hexa
    os << "CELL_DATA " << n_cells << "\n";
    os << "SCALARS s double 1\nLOOKUP_TABLE default\n";
    for (int i = 0; i < dd.n_subdomains(); ++i)
        for (double v : s[i]) os << num(v) << "\n";
    os << "SCALARS p double 1\nLOOKUP_TABLE default\n";
    for (int i = 0; i < dd.n_subdomains(); ++i)
        for (int k = 0; k < dd.mesh(i).n_cells; ++k)
            os << num(has_p ? out.snapshot_p[snap_index][i][k] : 0.0) << "\n";
    os << "SCALARS subdomain int 1\nLOOKUP_TABLE default\n";
    for (int i = 0; i < dd.n_subdomains(); ++i)
        for (int k = 0; k < dd.mesh(i).n_cells; ++k) os << i << "\n";
    return os.str();
}

std::string pressure_iteration_csv(const SimulationOutput& out) {
    std::ostringstream os;
    os << "time_index,method,iterations,subdomain_solves,final_residual\n";
    for (const WindowRecord& w : out.windows)
        os << w.index << "," << w.pressure.method << "," << w.pressure.iterations
           << "," << w.pressure.subdomain_solves << ","
           << num(w.pressure.final_residual) << "\n";
    return os.str();
}

std::string diffusion_iteration_csv(const SimulationOutput& out) {
    std::ostringstream os;
    os << "time_index,newton,gmres,oswr,subdomain_newton,subdomain_solves\n";
    long tn = 0, tg = 0, to = 0, ts = 0, tc = 0;
    for (const WindowRecord& w : out.windows) {
        const DiffusionReport& d = w.diffusion;
        os << w.index << "," << d.newton_iterations << "," << d.gmres_iterations
           << "," << d.oswr_iterations << "," << d.subdomain_newton_iterations
           << "," << d.subdomain_solves << "\n";
        tn += d.newton_iterations;
        tg += d.gmres_iterations;
        to += d.oswr_iterations;
        ts += d.subdomain_newton_iterations;
        tc += d.subdomain_solves;
    }
    const double nw = std::max<size_t>(out.windows.size(), 1);
    os << "total," << tn << "," << tg << "," << to << "," << ts << "," << tc
       << "\n";
    os << "average," << num(tn / nw) << "," << num(tg / nw) << "," << num(to / nw)
       << "," << num(ts / nw) << "," << num(tc / nw) << "\n";
    return os.str();
}

std::vector<std::string> write_run_outputs(const SimulationConfig& cfg,
                                           const SimulationOutput& out,
                                           const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::string> files;
    auto emit = [&](const std::string& name, const std::string& content) {
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        f << content;
        files.push_back(name);
    };

    for (size_t q = 0; q < out.snapshot_times.size(); ++q) {
        char stem[64];
        std::snprintf(stem, sizeof(stem), "snapshot_%04zu", q);
        emit(std::string(stem) + ".csv", snapshot_csv(out, q));
        emit(std::string(stem) + ".vtk", snapshot_vtk(out, q));
    }
    emit("pressure_iterations.csv", pressure_iteration_csv(out));
    emit("diffusion_iterations.csv", diffusion_iteration_csv(out));
    {
        std::ostringstream os;
        os << "index,t_begin,t_end,mass_begin,mass_end,net_influx,ledger_error,"
              "max_flux_jump,capillary_mismatch_advection,"
              "capillary_mismatch_diffusion\n";
        for (const WindowRecord& w : out.windows)
            os << w.index << "," << num(w.t_begin) << "," << num(w.t_end) << ","
               << num(w.mass_begin) << "," << num(w.mass_end) << ","
               << num(w.boundary_net_influx) << "," << num(w.ledger_error) << ","
               << num(w.max_flux_jump) << ","
               << num(w.capillary_mismatch_advection) << ","
               << num(w.capillary_mismatch_diffusion) << "\n";
        emit("mass_ledger.csv", os.str());
    }
    emit("config.ini", render_config(cfg));
    {
        std::ostringstream os;
        os << "preset " << cfg.preset << "\n";
        os << "config_hash " << config_hash(cfg) << "\n";
        for (const std::string& f : files) os << "file " << f << "\n";
        os << "file manifest.txt\n";
        emit("manifest.txt", os.str());
    }
    return files;
}

} // namespace splitflow
