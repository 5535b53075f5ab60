#pragma once

#include <string>
#include <vector>

#include "splitflow/config.hpp"
#include "splitflow/orchestrator.hpp"

namespace splitflow {

enum class StudyMode { TimeGrid, Multirate };

struct StudyRow {
    int level = 0;
    int factor = 0;            ///< multirate factor for that mode
    double error = 0.0;        ///< conforming (or multirate) error
    double order = 0.0;        ///< observed order against the previous level
    double error_nonconforming = 0.0;  ///< time-grid mode only
    double ratio_nonconforming = 0.0;  ///< nonconforming over conforming error
};

struct StudyResult {
    std::vector<StudyRow> rows;
    std::string csv() const;
};

/// Temporal accuracy studies against a fine single-rate reference computed
/// with the fully assembled solver.
///
/// TimeGrid mode: refine the advection grids `levels` times by factor two;
/// each level runs a conforming pair and a nonconforming pair that is fine in
/// the first subdomain.
///
/// Multirate mode: fixed fine step, multirate factor halved from
/// `base_factor` down; the error is measured against the single-rate
/// reference on the same fine step.
StudyResult study_convergence(const SimulationConfig& cfg, int levels,
                              StudyMode mode, int base_factor = 48);

/// Runs both schemes on the same configuration and reports the distance
/// between them plus per-scheme conservation summaries.
struct SchemeComparison {
    double distance = 0.0;  ///< saturation error norm between the schemes
    double ledger_scheme1 = 0.0;
    double ledger_scheme2 = 0.0;
    std::string csv() const;
};
SchemeComparison compare_schemes(const SimulationConfig& cfg);

/// Aggregates the iteration CSV logs of a finished run directory into a
/// totals/averages table.
std::string report_iterations(const std::string& run_dir);

} // namespace splitflow
