#pragma once

#include <string>
#include <vector>

#include "splitflow/config.hpp"
#include "splitflow/orchestrator.hpp"

namespace splitflow {

/// Writes all run artifacts into `dir`: per-snapshot CSV and legacy VTK
/// files, the iteration logs and a manifest enumerating every file. Output is
/// byte-stable for identical inputs. Returns the written file names.
std::vector<std::string> write_run_outputs(const SimulationConfig& cfg,
                                           const SimulationOutput& out,
                                           const std::string& dir);

/// One CSV row per cell: id, coordinates, subdomain, codim, s, p, |u|.
/// Fracture cells append with codim = 1.
std::string snapshot_csv(const SimulationOutput& out, size_t snap_index);

/// ASCII legacy VTK unstructured grid with cell data (s, p, subdomain).
std::string snapshot_vtk(const SimulationOutput& out, size_t snap_index);

/// Pressure iteration log: time_index, method, iterations, subdomain_solves,
/// final_residual.
std::string pressure_iteration_csv(const SimulationOutput& out);

/// Diffusion iteration accounting with totals and averages.
std::string diffusion_iteration_csv(const SimulationOutput& out);

} // namespace splitflow
