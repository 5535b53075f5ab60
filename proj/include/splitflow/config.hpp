#pragma once

#include <string>

#include "splitflow/orchestrator.hpp"

namespace splitflow {

/// Parses the sectioned key-value configuration format. `[section]` headers,
/// `key = value` lines, `#`/`;` comments. Quantities accept the unit
/// suffixes m, s, md, psi with fixed conversion constants. A `preset =` line
/// loads one of the bundled setups first; later keys override it.
/// Throws ConfigError with a line number on bad input.
SimulationConfig parse_config(const std::string& text);

/// Canonical rendering; parse(render(cfg)) reproduces cfg.
std::string render_config(const SimulationConfig& cfg);

/// Bundled desk-scale setups: test1, test2, test3-fracture, test3-multirock,
/// appendix-fracture, custom.
SimulationConfig preset_config(const std::string& name);

/// Stable hash of the canonical rendering, for run manifests.
std::string config_hash(const SimulationConfig& cfg);

} // namespace splitflow
