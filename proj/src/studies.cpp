#include "splitflow/studies.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace splitflow {

namespace {
std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}
} // namespace

std::string StudyResult::csv() const {
    std::ostringstream os;
    os << "level,factor,error,order,error_nonconforming,ratio_nonconforming\n";
    for (const StudyRow& r : rows)
        os << r.level << "," << r.factor << "," << num(r.error) << ","
           << num(r.order) << "," << num(r.error_nonconforming) << ","
           << num(r.ratio_nonconforming) << "\n";
    return os.str();
}

StudyResult study_convergence(const SimulationConfig& cfg, int levels,
                              StudyMode mode, int base_factor) {
    if (levels < 1) throw ConfigError("study needs at least one level");
    StudyResult res;

    if (mode == StudyMode::TimeGrid) {
        const int B = *std::max_element(cfg.substeps.begin(), cfg.substeps.end());
        // reference: single-rate fine stepping, fully assembled solves
        SimulationConfig ref_cfg = cfg;
        const int ref_sub = B * (1 << levels);
        ref_cfg.substeps.assign(cfg.substeps.size(), ref_sub);
        ref_cfg.advection_mode = AdvectionMode::Conforming;
        Simulation ref_sim(ref_cfg);
        SimulationOutput ref = ref_sim.monolithic_reference();

        double prev_err = 0.0;
        for (int l = 0; l < levels; ++l) {
            const int sub = B * (1 << l);
            SimulationConfig c1 = cfg;
            c1.substeps.assign(cfg.substeps.size(), sub);
            c1.advection_mode = AdvectionMode::Conforming;
            Simulation s1(c1);
            const double e_conf = error_norm(s1.run(), ref);

            SimulationConfig c2 = cfg;
            c2.substeps.assign(cfg.substeps.size(), sub);
            c2.substeps[0] = 2 * sub;  // fine in the first subdomain
            c2.advection_mode = AdvectionMode::Nonconforming;
            Simulation s2(c2);
            const double e_nonc = error_norm(s2.run(), ref);

            StudyRow row;
            row.level = l;
            row.factor = sub;
            row.error = e_conf;
            row.order = (l > 0 && e_conf > 0.0) ? std::log2(prev_err / e_conf) : 0.0;
            row.error_nonconforming = e_nonc;
            row.ratio_nonconforming = e_conf > 0.0 ? e_nonc / e_conf : 0.0;
            res.rows.push_back(row);
            prev_err = e_conf;
        }
        return res;
    }

    // Multirate mode: fixed fine step, multirate factor halved per level; the
    // reference runs single-rate on the same fine step.
    const int W0 = cfg.n_windows;
    SimulationConfig ref_cfg = cfg;
    ref_cfg.n_windows = W0 * base_factor;
    ref_cfg.substeps.assign(cfg.substeps.size(), 1);
    ref_cfg.advection_mode = AdvectionMode::Conforming;
    Simulation ref_sim(ref_cfg);
    SimulationOutput ref = ref_sim.monolithic_reference();

    double prev_err = 0.0;
    for (int l = 0; l < levels; ++l) {
        const int factor = base_factor >> l;
        if (factor < 1) break;
        SimulationConfig c = cfg;
        c.n_windows = W0 * (1 << l);
        c.substeps.assign(cfg.substeps.size(), factor);
        c.advection_mode = AdvectionMode::Conforming;
        Simulation sim(c);
        const double e = error_norm(sim.run(), ref);
        StudyRow row;
        row.level = l;
        row.factor = factor;
        row.error = e;
        row.order = (l > 0 && e > 0.0) ? std::log2(prev_err / e) : 0.0;
        res.rows.push_back(row);
        prev_err = e;
    }
    return res;
}

std::string SchemeComparison::csv() const {
    std::ostringstream os;
    os << "distance,ledger_scheme1,ledger_scheme2\n";
    os << num(distance) << "," << num(ledger_scheme1) << ","
       << num(ledger_scheme2) << "\n";
    return os.str();
}

SchemeComparison compare_schemes(const SimulationConfig& cfg) {
    SimulationConfig c1 = cfg;
    c1.scheme = SchemeKind::Scheme1;
    SimulationConfig c2 = cfg;
    c2.scheme = SchemeKind::Scheme2;
    Simulation s1(c1), s2(c2);
    SimulationOutput o1 = s1.run_scheme1();
    SimulationOutput o2 = s2.run_scheme2();
    SchemeComparison cmp;
    cmp.distance = error_norm(o1, o2);
    for (const auto& w : o1.windows)
        cmp.ledger_scheme1 = std::max(cmp.ledger_scheme1, w.ledger_error);
    for (const auto& w : o2.windows)
        cmp.ledger_scheme2 = std::max(cmp.ledger_scheme2, w.ledger_error);
    return cmp;
}

std::string report_iterations(const std::string& run_dir) {
    std::ostringstream os;
    for (const char* name : {"pressure_iterations.csv", "diffusion_iterations.csv"}) {
        std::ifstream f(run_dir + "/" + name);
        if (!f) continue;
        os << "== " << name << "\n";
        std::string header;
        std::getline(f, header);
        std::istringstream hs(header);
        std::vector<std::string> cols;
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
        std::vector<double> totals(cols.size(), 0.0);
        int rows = 0;
        std::string line;
        while (std::getline(f, line)) {
            if (line.rfind("total", 0) == 0 || line.rfind("average", 0) == 0)
                continue;
            std::istringstream ls(line);
            std::string cell;
            size_t idx = 0;
            std::vector<double> vals(cols.size(), 0.0);
            while (std::getline(ls, cell, ',') && idx < cols.size()) {
                try {
                    vals[idx] = std::stod(cell);
                } catch (...) {
                    vals[idx] = 0.0;  // non-numeric columns such as the method
                }
                ++idx;
            }
            for (size_t q = 1; q < cols.size(); ++q) totals[q] += vals[q];
            ++rows;
        }
        if (rows == 0) {
            os << "(empty)\n";
            continue;
        }
        os << "column,total,average\n";
        for (size_t q = 1; q < cols.size(); ++q)
            os << cols[q] << "," << num(totals[q]) << ","
               << num(totals[q] / rows) << "\n";
    }
    if (os.str().empty())
        throw ConfigError("no iteration logs found in '" + run_dir + "'");
    return os.str();
}

} // namespace splitflow
