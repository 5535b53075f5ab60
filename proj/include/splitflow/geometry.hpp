#pragma once

#include <array>
#include <string>
#include <vector>

#include "splitflow/errors.hpp"

namespace splitflow {

enum class BoundaryTag { NoFlow, Inflow, Outflow };

enum class FaceKind { Interior, Boundary, Mortar };

/// One mesh face. The canonical normal always points along +axis; the cell on
/// the negative side sees it as outward, the positive-side cell as inward.
struct Face {
    int axis = 0;
    FaceKind kind = FaceKind::Interior;
    BoundaryTag tag = BoundaryTag::NoFlow;  ///< meaningful for boundary faces
    int cell_neg = -1;                      ///< cell on the negative side, -1 if none
    int cell_pos = -1;                      ///< cell on the positive side, -1 if none
    double area = 0.0;
    std::array<double, 3> centroid{0.0, 0.0, 0.0};
    double d_neg = 0.0;  ///< distance from negative cell center to the face
    double d_pos = 0.0;
    int mortar_id = -1;  ///< global mortar index for interface faces

    int cell(int side) const { return side == 0 ? cell_neg : cell_pos; }
    /// Outward-normal sign of the canonical orientation for `cell`.
    double sign_for(int cell) const { return cell == cell_neg ? 1.0 : -1.0; }
};

/// Axis-aligned lattice of uniform boxes. 2D meshes carry unit thickness.
struct StructuredMesh {
    int dim = 2;
    std::array<int, 3> cells{1, 1, 1};
    std::array<double, 3> h{1.0, 1.0, 1.0};
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    int n_cells = 0;
    double cell_volume = 0.0;
    std::vector<Face> faces;
    std::vector<std::array<int, 6>> cell_faces;  ///< 2*dim valid entries per cell

    std::array<double, 3> cell_center(int c) const;
    int cell_index(int i, int j, int k) const {
        return i + cells[0] * (j + cells[1] * k);
    }
    double volume() const { return n_cells * cell_volume; }
};

/// Builds the lattice. `side_tags` orders as xmin,xmax,ymin,ymax,zmin,zmax;
/// sides listed in `mortar_sides` become interface faces instead of boundary.
StructuredMesh build_structured_mesh(int dim, const std::array<double, 3>& lo,
                                     const std::array<double, 3>& hi,
                                     const std::array<int, 3>& cells,
                                     const std::array<BoundaryTag, 6>& side_tags,
                                     const std::array<bool, 6>& mortar_sides);

/// Geometric factor of a two-point flux: |sigma|/d_{K,L} for interior faces,
/// |sigma|/d_{K,sigma} for one side of an interface face. Throws for boundary
/// faces, where no two-point flux applies.
double face_transmissibility(const StructuredMesh& mesh, int face);

/// One interface face linking a cell in the negative-side subdomain with the
/// matching cell on the positive side.
struct MortarFace {
    int sub_neg = -1, face_neg = -1;
    int sub_pos = -1, face_pos = -1;
    int interface_id = 0;  ///< which split plane
    double area = 0.0;
    std::array<double, 3> centroid{0.0, 0.0, 0.0};
    double d_neg = 0.0, d_pos = 0.0;
};

struct DecompositionSpec {
    int dim = 2;
    std::array<double, 3> lo{0.0, 0.0, 0.0};
    std::array<double, 3> hi{1.0, 1.0, 1.0};
    std::array<int, 3> cells{4, 4, 1};
    int split_axis = 0;
    std::vector<double> splits;        ///< interior split positions, ascending
    std::vector<int> rock_of_slab;     ///< rock table index per slab
    std::array<BoundaryTag, 6> side_tags{
        BoundaryTag::NoFlow, BoundaryTag::NoFlow, BoundaryTag::NoFlow,
        BoundaryTag::NoFlow, BoundaryTag::NoFlow, BoundaryTag::NoFlow};
};

/// Conforming slab decomposition. Subdomain meshes match one-to-one on every
/// split plane; mortar faces are ordered lexicographically by centroid so
/// interface vectors have a deterministic layout.
class DecomposedDomain {
public:
    static DecomposedDomain build(const DecompositionSpec& spec);

    int n_subdomains() const { return static_cast<int>(meshes_.size()); }
    const StructuredMesh& mesh(int i) const { return meshes_[i]; }
    int rock_index(int i) const { return rock_index_[i]; }
    const std::vector<MortarFace>& mortar() const { return mortar_; }
    int n_mortar() const { return static_cast<int>(mortar_.size()); }
    const DecompositionSpec& spec() const { return spec_; }

    /// (mortar id, local face id) pairs for one subdomain.
    const std::vector<std::pair<int, int>>& subdomain_mortars(int i) const {
        return sub_mortars_[i];
    }

    /// Side index (0 = negative, 1 = positive) of subdomain `sub` on mortar `m`.
    int side_of(int m, int sub) const {
        return mortar_[m].sub_neg == sub ? 0 : 1;
    }

    double total_volume() const;
    std::string summary() const;

private:
    DecompositionSpec spec_;
    std::vector<StructuredMesh> meshes_;
    std::vector<int> rock_index_;
    std::vector<MortarFace> mortar_;
    std::vector<std::vector<std::pair<int, int>>> sub_mortars_;
};

} // namespace splitflow
