#include "splitflow/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>
#include <vector>

namespace splitflow {

namespace {

constexpr double MILLIDARCY = 9.869233e-16;  // m^2
constexpr double PSI = 6894.757293168;       // Pa

double unit_factor(const std::string& u, int line) {
    if (u == "m" || u == "s") return 1.0;
    if (u == "md") return MILLIDARCY;
    if (u == "psi") return PSI;
    throw ConfigError("line " + std::to_string(line) + ": unknown unit '" + u + "'");
}

bool is_unit(const std::string& u) {
    return u == "m" || u == "s" || u == "md" || u == "psi";
}

struct Tokens {
    std::vector<std::string> parts;
    int line = 0;

    double number(size_t i) const {
        if (i >= parts.size())
            throw ConfigError("line " + std::to_string(line) + ": missing value");
        size_t pos = 0;
        double v;
        try {
            v = std::stod(parts[i], &pos);
        } catch (...) {
            throw ConfigError("line " + std::to_string(line) + ": bad number '" +
                              parts[i] + "'");
        }
        if (pos != parts[i].size())
            throw ConfigError("line " + std::to_string(line) + ": bad number '" +
                              parts[i] + "'");
        if (i + 1 < parts.size() && is_unit(parts[i + 1]))
            v *= unit_factor(parts[i + 1], line);
        return v;
    }
    std::vector<double> numbers() const {
        std::vector<double> out;
        for (size_t i = 0; i < parts.size(); ++i) {
            if (is_unit(parts[i])) continue;
            out.push_back(number(i));
        }
        return out;
    }
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int axis_of(const std::string& s, int line) {
    if (s == "x" || s == "0") return 0;
    if (s == "y" || s == "1") return 1;
    if (s == "z" || s == "2") return 2;
    throw ConfigError("line " + std::to_string(line) + ": bad axis '" + s + "'");
}

int side_of(const std::string& s, int line) {
    static const std::map<std::string, int> sides = {
        {"xmin", 0}, {"xmax", 1}, {"ymin", 2},
        {"ymax", 3}, {"zmin", 4}, {"zmax", 5}};
    auto it = sides.find(s);
    if (it == sides.end())
        throw ConfigError("line " + std::to_string(line) + ": bad side '" + s + "'");
    return it->second;
}

const char* side_name(int s) {
    static const char* names[6] = {"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"};
    return names[s];
}

} // namespace

SimulationConfig preset_config(const std::string& name) {
    SimulationConfig cfg;
    cfg.preset = name;
    if (name == "custom") return cfg;

    auto rock = [](double phi, double K, double n, double pe) {
        RockConfig r;
        r.porosity = phi;
        r.permeability = K;
        r.vg_n = n;
        r.vg_alpha = 1.0;
        r.entry_pressure = pe;
        return r;
    };

    if (name == "test1") {
        // capillary redistribution between two rock types, no total flow;
        // entry pressures keep the published 4.47:3.52 ratio at unit scale
        cfg.domain.dim = 2;
        cfg.domain.hi = {1.0, 0.5, 1.0};
        cfg.domain.cells = {16, 4, 1};
        cfg.domain.split_axis = 0;
        cfg.domain.splits = {0.5};
        cfg.domain.rock_of_slab = {0, 1};
        cfg.domain.side_tags = {BoundaryTag::Inflow,  BoundaryTag::Outflow,
                                BoundaryTag::NoFlow,  BoundaryTag::NoFlow,
                                BoundaryTag::NoFlow,  BoundaryTag::NoFlow};
        cfg.rocks = {rock(0.25, 1.0, 2.8, 1.0), rock(0.25, 1.0, 2.8, 0.7875)};
        cfg.gravity = false;
        cfg.fluid.rho_w = 1.0;
        cfg.fluid.rho_n = 1.0;
        cfg.total_time = 0.025;
        cfg.n_windows = 25;
        cfg.substeps = {1, 1};
        cfg.initial.value = {0.05, std::nan("")};
        cfg.initial.step_subdomain = 0;
        cfg.initial.step_axis = 0;
        cfg.initial.step_pos = 0.45;
        cfg.initial.step_left = 0.95;
        cfg.inflow_saturation = 0.97;
        cfg.inflow_flux = 0.0;
        return cfg;
    }
    if (name == "test2") {
        // displacement through two rock types; injection parallel to the
        // interface, multirate advection 20:10
        cfg.domain.dim = 2;
        cfg.domain.hi = {1.0, 1.0, 1.0};
        cfg.domain.cells = {8, 8, 1};
        cfg.domain.split_axis = 0;
        cfg.domain.splits = {0.5};
        cfg.domain.rock_of_slab = {0, 1};
        cfg.domain.side_tags = {BoundaryTag::NoFlow,  BoundaryTag::NoFlow,
                                BoundaryTag::Inflow,  BoundaryTag::Outflow,
                                BoundaryTag::NoFlow,  BoundaryTag::NoFlow};
        cfg.rocks = {rock(0.3, 0.05, 2.8, 1.0), rock(0.7, 0.01, 2.8, 1.2)};
        cfg.fluid.rho_w = 1.5;
        cfg.fluid.rho_n = 1.0;
        cfg.fluid.gravity = {0.0, -0.5, 0.0};
        cfg.gravity = true;
        cfg.total_time = 1.0;
        cfg.n_windows = 20;
        cfg.substeps = {20, 10};
        cfg.advection_mode = AdvectionMode::Nonconforming;
        cfg.initial.value = {0.05, std::nan("")};
        cfg.inflow_saturation = 0.9;
        cfg.inflow_flux = 0.05;
        return cfg;
    }
    if (name == "test3-fracture") {
        // three slabs, conductive middle layer, advection five times finer
        // there
        cfg.domain.dim = 2;
        cfg.domain.hi = {1.0, 1.0, 1.0};
        cfg.domain.cells = {15, 6, 1};
        cfg.domain.split_axis = 0;
        cfg.domain.splits = {0.4, 0.6};
        cfg.domain.rock_of_slab = {0, 1, 0};
        cfg.domain.side_tags = {BoundaryTag::NoFlow,  BoundaryTag::NoFlow,
                                BoundaryTag::Inflow,  BoundaryTag::Outflow,
                                BoundaryTag::NoFlow,  BoundaryTag::NoFlow};
        cfg.rocks = {rock(0.3, 0.02, 2.8, 1.0), rock(0.3, 0.2, 2.8, 0.8)};
        cfg.fluid.rho_w = 1.5;
        cfg.fluid.rho_n = 1.0;
        cfg.fluid.gravity = {0.0, -0.5, 0.0};
        cfg.gravity = true;
        cfg.total_time = 0.5;
        cfg.n_windows = 10;
        cfg.substeps = {4, 20, 4};
        cfg.advection_mode = AdvectionMode::Nonconforming;
        cfg.initial.value = {0.05, std::nan(""), std::nan("")};
        cfg.inflow_saturation = 0.9;
        cfg.inflow_flux = 0.05;
        return cfg;
    }
    if (name == "test3-multirock") {
        // four rock types with contrasted permeabilities and capillary
        // strengths; per-rock advection grids 10:5:2:2
        cfg.domain.dim = 2;
        cfg.domain.hi = {1.0, 1.0, 1.0};
        cfg.domain.cells = {16, 4, 1};
        cfg.domain.split_axis = 0;
        cfg.domain.splits = {0.25, 0.5, 0.75};
        cfg.domain.rock_of_slab = {0, 1, 2, 3};
        cfg.domain.side_tags = {BoundaryTag::NoFlow,  BoundaryTag::NoFlow,
                                BoundaryTag::Inflow,  BoundaryTag::Outflow,
                                BoundaryTag::NoFlow,  BoundaryTag::NoFlow};
        cfg.rocks = {rock(0.5, 0.06, 2.8, 0.3), rock(0.5, 0.03, 2.8, 0.3),
                     rock(0.3, 0.006, 2.8, 1.5), rock(0.3, 0.003, 2.8, 1.5)};
        cfg.fluid.rho_w = 1.5;
        cfg.fluid.rho_n = 1.0;
        cfg.fluid.gravity = {0.0, -0.5, 0.0};
        cfg.gravity = true;
        cfg.total_time = 0.5;
        cfg.n_windows = 10;
        cfg.substeps = {10, 5, 2, 2};
        cfg.advection_mode = AdvectionMode::Nonconforming;
        cfg.initial.value = {0.95, std::nan(""), std::nan(""), std::nan("")};
        cfg.inflow_saturation = 0.95;
        cfg.inflow_flux = 0.02;
        return cfg;
    }
    if (name == "appendix-fracture") {
        // reduced fracture between two matrix blocks with a hundred-fold
        // conductivity contrast
        cfg.domain.dim = 2;
        cfg.domain.hi = {0.4, 1.0, 1.0};
        cfg.domain.cells = {4, 8, 1};
        cfg.domain.split_axis = 0;
        cfg.domain.splits = {0.2};
        cfg.domain.rock_of_slab = {0, 0};
        cfg.domain.side_tags = {BoundaryTag::NoFlow,  BoundaryTag::NoFlow,
                                BoundaryTag::Inflow,  BoundaryTag::Outflow,
                                BoundaryTag::NoFlow,  BoundaryTag::NoFlow};
        cfg.rocks = {rock(0.1, 0.05, 2.0, 1.0)};
        cfg.fluid.rho_w = 1.0;
        cfg.fluid.rho_n = 1.0;
        cfg.gravity = false;
        cfg.total_time = 0.6;
        cfg.n_windows = 6;
        cfg.substeps = {4, 4};
        cfg.initial.value = {0.45, 0.45};
        cfg.inflow_saturation = 0.9;
        cfg.inflow_flux = 0.08;
        cfg.tol.newton_interface = 1e-8;
        cfg.tol.newton_subdomain = 1e-12;
        FractureConfig fc;
        fc.rock = rock(0.1, 0.05, 2.0, 1.0);
        fc.porosity_eff = 0.03;
        fc.permeability_eff = 5.0;
        fc.substeps = 32;
        cfg.fracture = fc;
        return cfg;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

SimulationConfig parse_config(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;

    SimulationConfig cfg;
    bool preset_loaded = false;
    std::map<int, RockConfig> rocks;
    bool fracture_seen = false;
    FractureConfig frac;
    std::string section;

    auto tag_of = [&](const std::string& v, int line) {
        if (v == "noflow") return BoundaryTag::NoFlow;
        if (v == "inflow") return BoundaryTag::Inflow;
        if (v == "outflow") return BoundaryTag::Outflow;
        throw ConfigError("line " + std::to_string(line) + ": bad boundary tag");
    };

    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        const size_t cpos = line.find_first_of("#;");
        if (cpos != std::string::npos) line = line.substr(0, cpos);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unterminated section header");
            section = line.substr(1, line.size() - 2);
            if (section == "fracture") fracture_seen = true;
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        auto trim = [](std::string s) {
            const auto bb = s.find_first_not_of(" \t");
            const auto ee = s.find_last_not_of(" \t");
            return bb == std::string::npos ? std::string()
                                           : s.substr(bb, ee - bb + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        Tokens tok;
        tok.line = lineno;
        {
            std::istringstream vs(val);
            std::string p;
            while (vs >> p) tok.parts.push_back(p);
        }
        auto need = [&](bool ok) {
            if (!ok)
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": bad value for '" + key + "'");
        };

        if (section.empty()) {
            if (key == "preset") {
                if (preset_loaded)
                    throw ConfigError("line " + std::to_string(lineno) +
                                      ": preset given twice");
                cfg = preset_config(val);
                if (cfg.fracture) {
                    frac = *cfg.fracture;
                    fracture_seen = true;
                }
                for (size_t r = 0; r < cfg.rocks.size(); ++r)
                    rocks[static_cast<int>(r) + 1] = cfg.rocks[r];
                preset_loaded = true;
            } else {
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unknown top-level key '" + key + "'");
            }
            continue;
        }

        if (section == "domain") {
            if (key == "dim") cfg.domain.dim = static_cast<int>(tok.number(0));
            else if (key == "lo") {
                auto v = tok.numbers();
                need(!v.empty());
                for (size_t i = 0; i < v.size() && i < 3; ++i) cfg.domain.lo[i] = v[i];
            } else if (key == "hi") {
                auto v = tok.numbers();
                need(!v.empty());
                for (size_t i = 0; i < v.size() && i < 3; ++i) cfg.domain.hi[i] = v[i];
            } else if (key == "cells") {
                auto v = tok.numbers();
                need(!v.empty());
                for (size_t i = 0; i < v.size() && i < 3; ++i)
                    cfg.domain.cells[i] = static_cast<int>(v[i]);
            } else if (key == "split_axis") {
                need(tok.parts.size() == 1);
                cfg.domain.split_axis = axis_of(tok.parts[0], lineno);
            } else if (key == "splits") {
                cfg.domain.splits = tok.numbers();
            } else if (key == "rocks") {
                auto v = tok.numbers();
                need(!v.empty());
                cfg.domain.rock_of_slab.clear();
                for (double r : v)
                    cfg.domain.rock_of_slab.push_back(static_cast<int>(r) - 1);
            } else if (key == "inflow" || key == "outflow" || key == "noflow") {
                for (const std::string& p : tok.parts)
                    cfg.domain.side_tags[side_of(p, lineno)] = tag_of(key, lineno);
            } else
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unknown key 'domain." + key + "'");
        } else if (section.rfind("rock.", 0) == 0) {
            const int id = std::atoi(section.c_str() + 5);
            if (id < 1) throw ConfigError("rock sections are numbered from 1");
            RockConfig& r = rocks[id];
            if (key == "porosity") r.porosity = tok.number(0);
            else if (key == "permeability") r.permeability = tok.number(0);
            else if (key == "vg_n") r.vg_n = tok.number(0);
            else if (key == "vg_alpha") r.vg_alpha = tok.number(0);
            else if (key == "entry_pressure") r.entry_pressure = tok.number(0);
            else if (key == "orientation") {
                need(tok.parts.size() == 1);
                if (val == "decreasing")
                    r.orientation = CapillaryOrientation::Decreasing;
                else if (val == "increasing")
                    r.orientation = CapillaryOrientation::Increasing;
                else
                    need(false);
            } else if (key == "table_resolution")
                r.table_resolution = static_cast<int>(tok.number(0));
            else if (key == "eps_s") r.eps_s = tok.number(0);
            else
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unknown key 'rock." + key + "'");
        } else if (section == "fluid") {
            if (key == "rho_w") cfg.fluid.rho_w = tok.number(0);
            else if (key == "rho_n") cfg.fluid.rho_n = tok.number(0);
            else if (key == "gravity") {
                auto v = tok.numbers();
                need(!v.empty());
                for (size_t i = 0; i < v.size() && i < 3; ++i)
                    cfg.fluid.gravity[i] = v[i];
            } else
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unknown key 'fluid." + key + "'");
        } else if (section == "time") {
            if (key == "total") cfg.total_time = tok.number(0);
            else if (key == "windows") cfg.n_windows = static_cast<int>(tok.number(0));
            else if (key == "substeps") {
                auto v = tok.numbers();
                need(!v.empty());
                cfg.substeps.clear();
                for (double x : v) cfg.substeps.push_back(static_cast<int>(x));
            } else
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unknown key 'time." + key + "'");
        } else if (section == "scheme") {
            need(tok.parts.size() >= 1);
            if (key == "kind") {
                if (val == "scheme1") cfg.scheme = SchemeKind::Scheme1;
                else if (val == "scheme2") cfg.scheme = SchemeKind::Scheme2;
                else need(false);
            } else if (key == "pressure") {
                if (val == "cg") cfg.pressure_method = PressureMethod::Cg;
                else if (val == "cg-nn") cfg.pressure_method = PressureMethod::CgNN;
                else if (val == "oswr") cfg.pressure_method = PressureMethod::Oswr;
                else need(false);
            } else if (key == "diffusion") {
                if (val == "newton-gmres")
                    cfg.diffusion_method = DiffusionMethod::NewtonGmres;
                else if (val == "newton-gmres-precond")
                    cfg.diffusion_method = DiffusionMethod::NewtonGmresPrecond;
                else if (val == "oswr") cfg.diffusion_method = DiffusionMethod::Oswr;
                else need(false);
            } else if (key == "advection") {
                if (val == "conforming")
                    cfg.advection_mode = AdvectionMode::Conforming;
                else if (val == "nonconforming")
                    cfg.advection_mode = AdvectionMode::Nonconforming;
                else need(false);
            } else
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unknown key 'scheme." + key + "'");
        } else if (section == "parameters") {
            if (key == "gamma") cfg.robin_gamma = tok.numbers();
            else if (key == "kappa") cfg.kappa = tok.numbers();
            else if (key == "kappa_advection") cfg.kappa_advection = tok.numbers();
            else if (key == "nn_weights") cfg.nn_weights = tok.numbers();
            else if (key == "cfl_safety") cfg.cfl_safety = tok.number(0);
            else
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unknown key 'parameters." + key + "'");
        } else if (section == "tolerances") {
            Tolerances& t = cfg.tol;
            if (key == "cg") t.cg = tok.number(0);
            else if (key == "oswr") t.oswr = tok.number(0);
            else if (key == "newton_interface") t.newton_interface = tok.number(0);
            else if (key == "newton_interface_abs")
                t.newton_interface_abs = tok.number(0);
            else if (key == "gmres_interface") t.gmres_interface = tok.number(0);
            else if (key == "newton_subdomain") t.newton_subdomain = tok.number(0);
            else if (key == "newton_subdomain_abs")
                t.newton_subdomain_abs = tok.number(0);
            else if (key == "advection_trace") t.advection_trace = tok.number(0);
            else if (key == "advection_trace_abs")
                t.advection_trace_abs = tok.number(0);
            else if (key == "advection_outer") t.advection_outer = tok.number(0);
            else if (key == "scheme2") t.scheme2 = tok.number(0);
            else if (key == "max_cg") t.max_cg = static_cast<int>(tok.number(0));
            else if (key == "max_oswr") t.max_oswr = static_cast<int>(tok.number(0));
            else if (key == "max_newton")
                t.max_newton = static_cast<int>(tok.number(0));
            else if (key == "max_gmres")
                t.max_gmres = static_cast<int>(tok.number(0));
            else if (key == "gmres_restart")
                t.gmres_restart = static_cast<int>(tok.number(0));
            else if (key == "max_scheme2_sweeps")
                t.max_scheme2_sweeps = static_cast<int>(tok.number(0));
            else if (key == "max_advection_outer")
                t.max_advection_outer = static_cast<int>(tok.number(0));
            else
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unknown key 'tolerances." + key + "'");
        } else if (section == "initial") {
            if (key == "values") {
                cfg.initial.value.clear();
                for (const std::string& p : tok.parts) {
                    if (p == "match")
                        cfg.initial.value.push_back(std::nan(""));
                    else
                        cfg.initial.value.push_back(std::stod(p));
                }
            } else if (key == "match_reference")
                cfg.initial.match_reference = static_cast<int>(tok.number(0)) - 1;
            else if (key == "step_subdomain")
                cfg.initial.step_subdomain = static_cast<int>(tok.number(0)) - 1;
            else if (key == "step_axis") {
                need(tok.parts.size() == 1);
                cfg.initial.step_axis = axis_of(tok.parts[0], lineno);
            } else if (key == "step_pos")
                cfg.initial.step_pos = tok.number(0);
            else if (key == "step_left")
                cfg.initial.step_left = tok.number(0);
            else
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unknown key 'initial." + key + "'");
        } else if (section == "boundary") {
            if (key == "inflow_saturation") cfg.inflow_saturation = tok.number(0);
            else if (key == "inflow_flux") cfg.inflow_flux = tok.number(0);
            else
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unknown key 'boundary." + key + "'");
        } else if (section == "output") {
            if (key == "snapshots") cfg.snapshot_times = tok.numbers();
            else
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unknown key 'output." + key + "'");
        } else if (section == "fracture") {
            if (key == "porosity") frac.porosity_eff = tok.number(0);
            else if (key == "permeability") frac.permeability_eff = tok.number(0);
            else if (key == "vg_n") frac.rock.vg_n = tok.number(0);
            else if (key == "vg_alpha") frac.rock.vg_alpha = tok.number(0);
            else if (key == "entry_pressure")
                frac.rock.entry_pressure = tok.number(0);
            else if (key == "substeps")
                frac.substeps = static_cast<int>(tok.number(0));
            else
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": unknown key 'fracture." + key + "'");
        } else {
            throw ConfigError("line " + std::to_string(lineno) +
                              ": unknown section '" + section + "'");
        }
    }

    if (!rocks.empty()) {
        cfg.rocks.clear();
        int expect = 1;
        for (const auto& [id, r] : rocks) {
            if (id != expect)
                throw ConfigError("rock sections must be numbered consecutively");
            cfg.rocks.push_back(r);
            ++expect;
        }
    }
    if (fracture_seen) cfg.fracture = frac;

    if (cfg.rocks.empty()) throw ConfigError("no rocks configured");
    for (int r : cfg.domain.rock_of_slab)
        if (r < 0 || r >= static_cast<int>(cfg.rocks.size()))
            throw ConfigError("slab references an undefined rock");
    if (!(cfg.total_time > 0.0) || cfg.n_windows < 1)
        throw ConfigError("non-positive time grid");
    for (int c : cfg.substeps)
        if (c < 1) throw ConfigError("non-positive substep count");
    if (cfg.nn_weights.size() == 2 &&
        std::abs(cfg.nn_weights[0] + cfg.nn_weights[1] - 1.0) > 1e-12)
        throw ConfigError("preconditioner weights must sum to one");
    return cfg;
}

std::string render_config(const SimulationConfig& cfg) {
    std::ostringstream os;
    os << "[domain]\n";
    os << "dim = " << cfg.domain.dim << "\n";
    os << "lo =";
    for (int i = 0; i < cfg.domain.dim; ++i) os << " " << fmt(cfg.domain.lo[i]);
    os << "\nhi =";
    for (int i = 0; i < cfg.domain.dim; ++i) os << " " << fmt(cfg.domain.hi[i]);
    os << "\ncells =";
    for (int i = 0; i < cfg.domain.dim; ++i) os << " " << cfg.domain.cells[i];
    os << "\nsplit_axis = " << "xyz"[cfg.domain.split_axis] << "\n";
    os << "splits =";
    for (double s : cfg.domain.splits) os << " " << fmt(s);
    os << "\nrocks =";
    for (int r : cfg.domain.rock_of_slab) os << " " << r + 1;
    os << "\n";
    for (int s = 0; s < 6; ++s) {
        if (cfg.domain.side_tags[s] == BoundaryTag::Inflow)
            os << "inflow = " << side_name(s) << "\n";
        else if (cfg.domain.side_tags[s] == BoundaryTag::Outflow)
            os << "outflow = " << side_name(s) << "\n";
    }
    for (size_t r = 0; r < cfg.rocks.size(); ++r) {
        const RockConfig& rc = cfg.rocks[r];
        os << "\n[rock." << r + 1 << "]\n";
        os << "porosity = " << fmt(rc.porosity) << "\n";
        os << "permeability = " << fmt(rc.permeability) << "\n";
        os << "vg_n = " << fmt(rc.vg_n) << "\n";
        os << "vg_alpha = " << fmt(rc.vg_alpha) << "\n";
        os << "entry_pressure = " << fmt(rc.entry_pressure) << "\n";
        os << "orientation = "
           << (rc.orientation == CapillaryOrientation::Decreasing ? "decreasing"
                                                                  : "increasing")
           << "\n";
        os << "table_resolution = " << rc.table_resolution << "\n";
        os << "eps_s = " << fmt(rc.eps_s) << "\n";
    }
    os << "\n[fluid]\n";
    os << "rho_w = " << fmt(cfg.fluid.rho_w) << "\n";
    os << "rho_n = " << fmt(cfg.fluid.rho_n) << "\n";
    os << "gravity = " << fmt(cfg.fluid.gravity[0]) << " "
       << fmt(cfg.fluid.gravity[1]) << " " << fmt(cfg.fluid.gravity[2]) << "\n";
    os << "\n[time]\n";
    os << "total = " << fmt(cfg.total_time) << "\n";
    os << "windows = " << cfg.n_windows << "\n";
    os << "substeps =";
    for (int s : cfg.substeps) os << " " << s;
    os << "\n";
    os << "\n[scheme]\n";
    os << "kind = " << (cfg.scheme == SchemeKind::Scheme1 ? "scheme1" : "scheme2")
       << "\n";
    os << "pressure = "
       << (cfg.pressure_method == PressureMethod::Cg
               ? "cg"
               : cfg.pressure_method == PressureMethod::CgNN ? "cg-nn" : "oswr")
       << "\n";
    os << "diffusion = "
       << (cfg.diffusion_method == DiffusionMethod::NewtonGmres
               ? "newton-gmres"
               : cfg.diffusion_method == DiffusionMethod::NewtonGmresPrecond
                     ? "newton-gmres-precond"
                     : "oswr")
       << "\n";
    os << "advection = "
       << (cfg.advection_mode == AdvectionMode::Conforming ? "conforming"
                                                           : "nonconforming")
       << "\n";
    os << "\n[parameters]\n";
    if (!cfg.robin_gamma.empty()) {
        os << "gamma =";
        for (double g : cfg.robin_gamma) os << " " << fmt(g);
        os << "\n";
    }
    if (!cfg.kappa.empty()) {
        os << "kappa =";
        for (double k : cfg.kappa) os << " " << fmt(k);
        os << "\n";
    }
    if (!cfg.kappa_advection.empty()) {
        os << "kappa_advection =";
        for (double k : cfg.kappa_advection) os << " " << fmt(k);
        os << "\n";
    }
    if (!cfg.nn_weights.empty()) {
        os << "nn_weights =";
        for (double w : cfg.nn_weights) os << " " << fmt(w);
        os << "\n";
    }
    os << "cfl_safety = " << fmt(cfg.cfl_safety) << "\n";
    const Tolerances def;
    const Tolerances& t = cfg.tol;
    os << "\n[tolerances]\n";
    os << "cg = " << fmt(t.cg) << "\n";
    os << "oswr = " << fmt(t.oswr) << "\n";
    os << "newton_interface = " << fmt(t.newton_interface) << "\n";
    if (t.newton_interface_abs != def.newton_interface_abs)
        os << "newton_interface_abs = " << fmt(t.newton_interface_abs) << "\n";
    os << "gmres_interface = " << fmt(t.gmres_interface) << "\n";
    os << "newton_subdomain = " << fmt(t.newton_subdomain) << "\n";
    if (t.newton_subdomain_abs != def.newton_subdomain_abs)
        os << "newton_subdomain_abs = " << fmt(t.newton_subdomain_abs) << "\n";
    os << "advection_trace = " << fmt(t.advection_trace) << "\n";
    if (t.advection_trace_abs != def.advection_trace_abs)
        os << "advection_trace_abs = " << fmt(t.advection_trace_abs) << "\n";
    os << "advection_outer = " << fmt(t.advection_outer) << "\n";
    os << "scheme2 = " << fmt(t.scheme2) << "\n";
    if (t.max_cg != def.max_cg) os << "max_cg = " << t.max_cg << "\n";
    if (t.max_oswr != def.max_oswr) os << "max_oswr = " << t.max_oswr << "\n";
    if (t.max_newton != def.max_newton) os << "max_newton = " << t.max_newton << "\n";
    if (t.max_gmres != def.max_gmres) os << "max_gmres = " << t.max_gmres << "\n";
    if (t.gmres_restart != def.gmres_restart)
        os << "gmres_restart = " << t.gmres_restart << "\n";
    if (t.max_scheme2_sweeps != def.max_scheme2_sweeps)
        os << "max_scheme2_sweeps = " << t.max_scheme2_sweeps << "\n";
    if (t.max_advection_outer != def.max_advection_outer)
        os << "max_advection_outer = " << t.max_advection_outer << "\n";
    os << "\n[initial]\n";
    os << "values =";
    for (double v : cfg.initial.value)
        os << " " << (std::isnan(v) ? std::string("match") : fmt(v));
    os << "\n";
    os << "match_reference = " << cfg.initial.match_reference + 1 << "\n";
    if (cfg.initial.step_subdomain >= 0) {
        os << "step_subdomain = " << cfg.initial.step_subdomain + 1 << "\n";
        os << "step_axis = " << "xyz"[cfg.initial.step_axis] << "\n";
        os << "step_pos = " << fmt(cfg.initial.step_pos) << "\n";
        os << "step_left = " << fmt(cfg.initial.step_left) << "\n";
    }
    os << "\n[boundary]\n";
    os << "inflow_saturation = " << fmt(cfg.inflow_saturation) << "\n";
    os << "inflow_flux = " << fmt(cfg.inflow_flux) << "\n";
    if (!cfg.snapshot_times.empty()) {
        os << "\n[output]\n";
        os << "snapshots =";
        for (double s : cfg.snapshot_times) os << " " << fmt(s);
        os << "\n";
    }
    if (cfg.fracture) {
        const FractureConfig& fc = *cfg.fracture;
        os << "\n[fracture]\n";
        os << "porosity = " << fmt(fc.porosity_eff) << "\n";
        os << "permeability = " << fmt(fc.permeability_eff) << "\n";
        os << "vg_n = " << fmt(fc.rock.vg_n) << "\n";
        os << "vg_alpha = " << fmt(fc.rock.vg_alpha) << "\n";
        os << "entry_pressure = " << fmt(fc.rock.entry_pressure) << "\n";
        os << "substeps = " << fc.substeps << "\n";
    }
    return os.str();
}

std::string config_hash(const SimulationConfig& cfg) {
    // FNV-1a over the canonical rendering
    const std::string s = render_config(cfg);
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace splitflow
