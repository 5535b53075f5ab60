#include "splitflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace splitflow {

std::array<double, 3> StructuredMesh::cell_center(int c) const {
    const int i = c % cells[0];
    const int j = (c / cells[0]) % cells[1];
    const int k = c / (cells[0] * cells[1]);
    return {origin[0] + (i + 0.5) * h[0], origin[1] + (j + 0.5) * h[1],
            origin[2] + (k + 0.5) * h[2]};
}

StructuredMesh build_structured_mesh(int dim, const std::array<double, 3>& lo,
                                     const std::array<double, 3>& hi,
                                     const std::array<int, 3>& cells,
                                     const std::array<BoundaryTag, 6>& side_tags,
                                     const std::array<bool, 6>& mortar_sides) {
    StructuredMesh m;
    m.dim = dim;
    m.cells = cells;
    if (dim == 2 && cells[2] != 1) throw ConfigError("2D mesh needs cells_z = 1");
    for (int a = 0; a < 3; ++a) {
        if (cells[a] < 1) throw ConfigError("cell count must be >= 1");
        m.h[a] = (a < dim) ? (hi[a] - lo[a]) / cells[a] : 1.0;
        if (a < dim && !(m.h[a] > 0.0)) throw ConfigError("empty extent");
        m.origin[a] = lo[a];
    }
    m.n_cells = cells[0] * cells[1] * cells[2];
    m.cell_volume = m.h[0] * m.h[1] * m.h[2];
    m.cell_faces.assign(m.n_cells, {-1, -1, -1, -1, -1, -1});

    auto face_area = [&](int axis) {
        double a = 1.0;
        for (int b = 0; b < 3; ++b)
            if (b != axis) a *= m.h[b];
        return a;
    };
    auto add_face = [&](Face f) {
        const int id = static_cast<int>(m.faces.size());
        if (f.cell_neg >= 0) m.cell_faces[f.cell_neg][2 * f.axis + 1] = id;
        if (f.cell_pos >= 0) m.cell_faces[f.cell_pos][2 * f.axis] = id;
        m.faces.push_back(f);
    };

    for (int axis = 0; axis < dim; ++axis) {
        const int n0 = cells[0], n1 = cells[1], n2 = cells[2];
        for (int k = 0; k < n2; ++k)
            for (int j = 0; j < n1; ++j)
                for (int i = 0; i < n0; ++i) {
                    const int c = m.cell_index(i, j, k);
                    const std::array<int, 3> idx{i, j, k};
                    auto center = m.cell_center(c);
                    // negative-side face owned by the cell at the boundary
                    if (idx[axis] == 0) {
                        Face f;
                        f.axis = axis;
                        f.cell_pos = c;
                        f.area = face_area(axis);
                        f.centroid = center;
                        f.centroid[axis] -= 0.5 * m.h[axis];
                        f.d_pos = 0.5 * m.h[axis];
                        if (mortar_sides[2 * axis]) {
                            f.kind = FaceKind::Mortar;
                        } else {
                            f.kind = FaceKind::Boundary;
                            f.tag = side_tags[2 * axis];
                        }
                        add_face(f);
                    }
                    // positive-side face: interior link or boundary/mortar
                    Face f;
                    f.axis = axis;
                    f.cell_neg = c;
                    f.area = face_area(axis);
                    f.centroid = center;
                    f.centroid[axis] += 0.5 * m.h[axis];
                    f.d_neg = 0.5 * m.h[axis];
                    if (idx[axis] + 1 < cells[axis]) {
                        std::array<int, 3> nb = idx;
                        nb[axis] += 1;
                        f.kind = FaceKind::Interior;
                        f.cell_pos = m.cell_index(nb[0], nb[1], nb[2]);
                        f.d_pos = 0.5 * m.h[axis];
                    } else if (mortar_sides[2 * axis + 1]) {
                        f.kind = FaceKind::Mortar;
                    } else {
                        f.kind = FaceKind::Boundary;
                        f.tag = side_tags[2 * axis + 1];
                    }
                    add_face(f);
                }
    }
    return m;
}

double face_transmissibility(const StructuredMesh& mesh, int face) {
    const Face& f = mesh.faces[face];
    switch (f.kind) {
    case FaceKind::Interior:
        return f.area / (f.d_neg + f.d_pos);
    case FaceKind::Mortar:
        return f.area / (f.cell_neg >= 0 ? f.d_neg : f.d_pos);
    default:
        throw ConfigError("face_transmissibility: no two-point flux on boundary faces");
    }
}

DecomposedDomain DecomposedDomain::build(const DecompositionSpec& spec) {
    DecomposedDomain dd;
    dd.spec_ = spec;
    const int axis = spec.split_axis;
    if (axis < 0 || axis >= spec.dim) throw ConfigError("split axis outside dimension");
    const int n_slabs = static_cast<int>(spec.splits.size()) + 1;
    if (static_cast<int>(spec.rock_of_slab.size()) != n_slabs)
        throw ConfigError("need one rock per slab");

    const double h_axis = (spec.hi[axis] - spec.lo[axis]) / spec.cells[axis];
    std::vector<int> cut{0};
    for (double s : spec.splits) {
        const double pos = (s - spec.lo[axis]) / h_axis;
        const int idx = static_cast<int>(std::lround(pos));
        if (std::abs(pos - idx) > 1e-9)
            throw ConfigError("split plane does not align with the lattice");
        if (idx <= cut.back() || idx >= spec.cells[axis])
            throw ConfigError("split plane yields an empty subdomain");
        cut.push_back(idx);
    }
    cut.push_back(spec.cells[axis]);

    for (int s = 0; s < n_slabs; ++s) {
        std::array<double, 3> lo = spec.lo, hi = spec.hi;
        std::array<int, 3> cells = spec.cells;
        lo[axis] = spec.lo[axis] + cut[s] * h_axis;
        hi[axis] = spec.lo[axis] + cut[s + 1] * h_axis;
        cells[axis] = cut[s + 1] - cut[s];
        std::array<bool, 6> mortar_sides{false, false, false, false, false, false};
        if (s > 0) mortar_sides[2 * axis] = true;
        if (s + 1 < n_slabs) mortar_sides[2 * axis + 1] = true;
        dd.meshes_.push_back(build_structured_mesh(spec.dim, lo, hi, cells,
                                                   spec.side_tags, mortar_sides));
        dd.rock_index_.push_back(spec.rock_of_slab[s]);
    }

    // Pair up interface faces across each split plane and order all mortar
    // faces lexicographically by centroid.
    struct Raw {
        std::array<double, 3> key;
        MortarFace mf;
    };
    std::vector<Raw> raw;
    for (int plane = 0; plane + 1 < n_slabs; ++plane) {
        const StructuredMesh& mn = dd.meshes_[plane];
        const StructuredMesh& mp = dd.meshes_[plane + 1];
        std::vector<int> neg_faces, pos_faces;
        for (int fi = 0; fi < static_cast<int>(mn.faces.size()); ++fi)
            if (mn.faces[fi].kind == FaceKind::Mortar && mn.faces[fi].cell_neg >= 0 &&
                mn.faces[fi].axis == axis)
                neg_faces.push_back(fi);
        for (int fi = 0; fi < static_cast<int>(mp.faces.size()); ++fi)
            if (mp.faces[fi].kind == FaceKind::Mortar && mp.faces[fi].cell_pos >= 0 &&
                mp.faces[fi].axis == axis)
                pos_faces.push_back(fi);
        // keep only the faces on this plane (a middle slab has two mortar sides)
        const double plane_pos = dd.meshes_[plane].origin[axis] +
                                 dd.meshes_[plane].cells[axis] * dd.meshes_[plane].h[axis];
        auto on_plane = [&](const StructuredMesh& m, int fi) {
            return std::abs(m.faces[fi].centroid[axis] - plane_pos) <
                   1e-9 * (1.0 + std::abs(plane_pos));
        };
        std::erase_if(neg_faces, [&](int fi) { return !on_plane(mn, fi); });
        std::erase_if(pos_faces, [&](int fi) { return !on_plane(mp, fi); });
        if (neg_faces.size() != pos_faces.size())
            throw ConfigError("interface traces do not match across the split plane");
        auto by_centroid = [](const StructuredMesh& m) {
            return [&m](int a, int b) {
                return m.faces[a].centroid < m.faces[b].centroid;
            };
        };
        std::sort(neg_faces.begin(), neg_faces.end(), by_centroid(mn));
        std::sort(pos_faces.begin(), pos_faces.end(), by_centroid(mp));
        for (size_t q = 0; q < neg_faces.size(); ++q) {
            const Face& fn = mn.faces[neg_faces[q]];
            const Face& fp = mp.faces[pos_faces[q]];
            for (int b = 0; b < 3; ++b)
                if (std::abs(fn.centroid[b] - fp.centroid[b]) > 1e-12 * (1.0 + std::abs(fn.centroid[b])))
                    throw ConfigError("mismatched interface face centroids");
            Raw r;
            r.key = fn.centroid;
            r.mf.sub_neg = plane;
            r.mf.face_neg = neg_faces[q];
            r.mf.sub_pos = plane + 1;
            r.mf.face_pos = pos_faces[q];
            r.mf.interface_id = plane;
            r.mf.area = fn.area;
            r.mf.centroid = fn.centroid;
            r.mf.d_neg = fn.d_neg;
            r.mf.d_pos = fp.d_pos;
            raw.push_back(r);
        }
    }
    std::sort(raw.begin(), raw.end(),
              [](const Raw& a, const Raw& b) { return a.key < b.key; });
    dd.sub_mortars_.assign(dd.meshes_.size(), {});
    for (size_t q = 0; q < raw.size(); ++q) {
        const int id = static_cast<int>(q);
        MortarFace mf = raw[q].mf;
        dd.meshes_[mf.sub_neg].faces[mf.face_neg].mortar_id = id;
        dd.meshes_[mf.sub_pos].faces[mf.face_pos].mortar_id = id;
        dd.sub_mortars_[mf.sub_neg].push_back({id, mf.face_neg});
        dd.sub_mortars_[mf.sub_pos].push_back({id, mf.face_pos});
        dd.mortar_.push_back(mf);
    }
    return dd;
}

double DecomposedDomain::total_volume() const {
    double v = 0.0;
    for (const auto& m : meshes_) v += m.volume();
    return v;
}

std::string DecomposedDomain::summary() const {
    std::ostringstream os;
    os << n_subdomains() << " subdomains, " << n_mortar() << " interface faces\n";
    for (int i = 0; i < n_subdomains(); ++i) {
        const auto& m = meshes_[i];
        os << "  subdomain " << i << ": " << m.n_cells << " cells, "
           << m.faces.size() << " faces, rock " << rock_index_[i] << "\n";
    }
    return os.str();
}

} // namespace splitflow
