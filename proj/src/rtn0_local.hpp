#pragma once

// Cell-local RTN0 kernels shared by the subdomain and monolithic assemblies.

#include <Eigen/Dense>

#include "splitflow/geometry.hpp"

namespace splitflow::detail {

// Geometric RTN0 mass matrix on a box, outward-normal face dofs ordered like
// cell_faces (2*axis = lower face, 2*axis+1 = upper).
inline Eigen::MatrixXd geometric_mass(const StructuredMesh& m) {
    const int nf = 2 * m.dim;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nf, nf);
    const double V = m.cell_volume;
    for (int a = 0; a < m.dim; ++a) {
        M(2 * a, 2 * a) = V / 3.0;
        M(2 * a + 1, 2 * a + 1) = V / 3.0;
        M(2 * a, 2 * a + 1) = -V / 6.0;
        M(2 * a + 1, 2 * a) = -V / 6.0;
    }
    return M;
}

// Outward-normal component of a constant vector at local dof ld.
inline double outward_component(const std::array<double, 3>& v, int ld) {
    return (ld % 2 == 0) ? -v[ld / 2] : v[ld / 2];
}

} // namespace splitflow::detail
