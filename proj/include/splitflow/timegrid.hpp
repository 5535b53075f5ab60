#pragma once

#include <vector>

#include "splitflow/errors.hpp"

namespace splitflow {

/// Partition of one time window into fine intervals. Breakpoints are stored
/// (not steps) so interval sums telescope exactly; uniform partitions place
/// breakpoint l at t0 + (l/count)*(t1-t0) with the last pinned to t1.
struct FinePartition {
    double t0 = 0.0, t1 = 1.0;
    std::vector<double> breakpoints;  ///< size count+1, breakpoints[0]=t0, back()=t1

    static FinePartition uniform(double t0, double t1, int count);
    static FinePartition from_breakpoints(std::vector<double> pts);

    int count() const { return static_cast<int>(breakpoints.size()) - 1; }
    double step(int l) const { return breakpoints[l + 1] - breakpoints[l]; }
};

/// Coarse time grid plus per-subdomain fine partitions of every window.
struct TimeGrids {
    std::vector<double> coarse;                         ///< t0=0 < ... < tN=T
    std::vector<std::vector<FinePartition>> fine;       ///< [window][subdomain]

    int n_windows() const { return static_cast<int>(coarse.size()) - 1; }
    double window_step(int n) const { return coarse[n + 1] - coarse[n]; }

    /// Uniform coarse grid with constant per-subdomain multirate factors.
    static TimeGrids uniform(double T, int n_windows,
                             const std::vector<int>& substeps_per_subdomain);
};

/// Measure of every pairwise intersection between the fine intervals of two
/// partitions of the same window, by a two-pointer sweep over the sorted
/// breakpoints.
struct Overlap {
    int l;           ///< interval index in grid_i
    int m;           ///< interval index in grid_j
    double measure;  ///< |I_i^l  intersect  I_j^m|
};
std::vector<Overlap> overlaps(const FinePartition& grid_i,
                              const FinePartition& grid_j);

/// L2 projection of a piecewise-constant-in-time scalar from grid_j onto
/// grid_i: value on I_i^l is the average of src over that interval. Preserves
/// constants and the window integral.
std::vector<double> project(const std::vector<double>& src,
                            const FinePartition& grid_j,
                            const FinePartition& grid_i);

/// Same projection applied to vector-valued interval data (one vector per
/// fine interval, all of equal size).
std::vector<std::vector<double>> project_vectors(
    const std::vector<std::vector<double>>& src, const FinePartition& grid_j,
    const FinePartition& grid_i);

} // namespace splitflow
