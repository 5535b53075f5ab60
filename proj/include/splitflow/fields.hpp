#pragma once

#include <cmath>
#include <vector>

#include "splitflow/geometry.hpp"

namespace splitflow {

/// Piecewise-constant scalar per cell of one subdomain.
using CellField = std::vector<double>;

/// Normal flux per face in the face's canonical (+axis) orientation.
using FaceFluxField = std::vector<double>;

/// One value per mortar face in the global mortar ordering.
using InterfaceTrace = std::vector<double>;

inline InterfaceTrace zero_trace(const DecomposedDomain& dd) {
    return InterfaceTrace(dd.n_mortar(), 0.0);
}

/// Area-weighted inner product on the interface.
inline double trace_dot(const DecomposedDomain& dd, const InterfaceTrace& a,
                        const InterfaceTrace& b) {
    double s = 0.0;
    for (int m = 0; m < dd.n_mortar(); ++m) s += dd.mortar()[m].area * a[m] * b[m];
    return s;
}

inline double trace_norm(const DecomposedDomain& dd, const InterfaceTrace& a) {
    return std::sqrt(trace_dot(dd, a, a));
}

/// Removes the area-weighted mean (the constant component).
inline void trace_deflate(const DecomposedDomain& dd, InterfaceTrace& a) {
    double area = 0.0, mean = 0.0;
    for (int m = 0; m < dd.n_mortar(); ++m) {
        area += dd.mortar()[m].area;
        mean += dd.mortar()[m].area * a[m];
    }
    mean /= area;
    for (auto& v : a) v -= mean;
}

} // namespace splitflow
