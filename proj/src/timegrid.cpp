#include "splitflow/timegrid.hpp"

#include <algorithm>
#include <cmath>

namespace splitflow {

FinePartition FinePartition::uniform(double t0, double t1, int count) {
    if (count < 1) throw ConfigError("fine partition needs at least one interval");
    if (!(t1 > t0)) throw ConfigError("empty time window");
    FinePartition p;
    p.t0 = t0;
    p.t1 = t1;
    p.breakpoints.resize(count + 1);
    for (int l = 0; l <= count; ++l)
        p.breakpoints[l] = t0 + (t1 - t0) * (static_cast<double>(l) / count);
    p.breakpoints[0] = t0;
    p.breakpoints[count] = t1;
    return p;
}

FinePartition FinePartition::from_breakpoints(std::vector<double> pts) {
    if (pts.size() < 2) throw ConfigError("fine partition needs at least one interval");
    for (size_t i = 0; i + 1 < pts.size(); ++i)
        if (!(pts[i + 1] > pts[i])) throw ConfigError("breakpoints must increase");
    FinePartition p;
    p.t0 = pts.front();
    p.t1 = pts.back();
    p.breakpoints = std::move(pts);
    return p;
}

TimeGrids TimeGrids::uniform(double T, int n_windows,
                             const std::vector<int>& substeps) {
    if (n_windows < 1) throw ConfigError("need at least one window");
    TimeGrids tg;
    tg.coarse.resize(n_windows + 1);
    for (int n = 0; n <= n_windows; ++n)
        tg.coarse[n] = T * (static_cast<double>(n) / n_windows);
    tg.coarse[0] = 0.0;
    tg.coarse[n_windows] = T;
    tg.fine.resize(n_windows);
    for (int n = 0; n < n_windows; ++n)
        for (int i = 0; i < static_cast<int>(substeps.size()); ++i)
            tg.fine[n].push_back(
                FinePartition::uniform(tg.coarse[n], tg.coarse[n + 1], substeps[i]));
    return tg;
}

std::vector<Overlap> overlaps(const FinePartition& gi, const FinePartition& gj) {
    if (gi.t0 != gj.t0 || gi.t1 != gj.t1)
        throw ConfigError("overlaps: partitions cover different windows");
    std::vector<Overlap> out;
    int l = 0, m = 0;
    while (l < gi.count() && m < gj.count()) {
        const double lo = std::max(gi.breakpoints[l], gj.breakpoints[m]);
        const double hi = std::min(gi.breakpoints[l + 1], gj.breakpoints[m + 1]);
        if (hi > lo) out.push_back({l, m, hi - lo});
        // advance whichever interval ends first
        if (gi.breakpoints[l + 1] <= gj.breakpoints[m + 1])
            ++l;
        else
            ++m;
    }
    return out;
}

std::vector<double> project(const std::vector<double>& src,
                            const FinePartition& gj, const FinePartition& gi) {
    if (static_cast<int>(src.size()) != gj.count())
        throw ConfigError("project: value count does not match source grid");
    std::vector<double> dst(gi.count(), 0.0);
    for (const Overlap& ov : overlaps(gi, gj)) dst[ov.l] += ov.measure * src[ov.m];
    for (int l = 0; l < gi.count(); ++l) dst[l] /= gi.step(l);
    return dst;
}

std::vector<std::vector<double>> project_vectors(
    const std::vector<std::vector<double>>& src, const FinePartition& gj,
    const FinePartition& gi) {
    if (static_cast<int>(src.size()) != gj.count())
        throw ConfigError("project: value count does not match source grid");
    const size_t width = src.empty() ? 0 : src.front().size();
    std::vector<std::vector<double>> dst(gi.count(), std::vector<double>(width, 0.0));
    for (const Overlap& ov : overlaps(gi, gj))
        for (size_t q = 0; q < width; ++q)
            dst[ov.l][q] += ov.measure * src[ov.m][q];
    for (int l = 0; l < gi.count(); ++l)
        for (size_t q = 0; q < width; ++q) dst[l][q] /= gi.step(l);
    return dst;
}

} // namespace splitflow
