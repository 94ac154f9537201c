#ifndef ROMFORGE_MESH_HPP
#define ROMFORGE_MESH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "romforge/errors.hpp"

namespace romforge {

using Vec2 = Eigen::Vector2d;

/// One face of a finite-volume cell. `area` is the face-area vector
/// (length x unit depth). For interior faces it points from `owner`
/// towards `neighbour`; for boundary faces (neighbour == -1) it points
/// out of the domain.
struct Face {
    int owner = -1;
    int neighbour = -1; // -1 on the boundary
    int va = -1;        // vertex ids; area = perp(vb - va)
    int vb = -1;
    Vec2 center = Vec2::Zero();
    Vec2 area = Vec2::Zero();
};

struct MeshQuality {
    double min_volume = 0.0;
    double max_nonorthogonality_deg = 0.0; // angle(area, cell-to-cell vector)
    double max_skewness = 0.0; // |face center - midpoint(P,N)| / |PN|
};

/// Structured 2D finite-volume mesh of quadrilateral cells with unit
/// depth, so cell volumes carry m^2 semantics. Cells are indexed
/// j*nx + i; vertices j*(nx+1) + i.
///
/// Boundary patches partition the boundary faces: inlet (x = min),
/// outlet (x = max), wall_lower (y = min), wall_upper (y = max).
class StructuredMesh {
public:
    int nx = 0;
    int ny = 0;
    std::vector<Vec2> vertices;
    std::vector<Face> faces;
    std::vector<Vec2> cell_centers;
    std::vector<double> cell_volumes;

    std::vector<int> inlet;      // face ids
    std::vector<int> outlet;
    std::vector<int> wall_lower;
    std::vector<int> wall_upper;

    int n_cells() const { return nx * ny; }
    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_faces() const { return static_cast<int>(faces.size()); }
    int cell_index(int i, int j) const { return j * nx + i; }
    int vertex_index(int i, int j) const { return j * (nx + 1) + i; }

    /// Wall faces in canonical order: wall_lower then wall_upper,
    /// each ascending by face id. WSS fields use this ordering.
    std::vector<int> wall_faces() const;

    int n_boundary_faces() const;

    /// Recompute face centers, face-area vectors, cell centers and
    /// volumes from current vertex positions. Throws
    /// InvalidDeformationError if any cell volume is non-positive.
    void recompute_geometry();

    /// Max over cells of |sum of outward face-area vectors| (closed
    /// surface defect; zero up to rounding for straight-edged quads).
    double max_closure_defect() const;

    MeshQuality quality() const;

    /// FNV-1a hash over dimensions and vertex coordinates. Fields and
    /// ROM artifacts carry this to detect mesh mismatches.
    std::uint64_t checksum() const;
};

/// Build an orthogonal tensor-product channel mesh on
/// [0,length] x [0,height] with uniform spacing per direction.
/// Requires nx, ny >= 4 and positive dimensions.
StructuredMesh build_channel_mesh(double length, double height, int nx, int ny);

/// Write `metric,value` rows for a quality report.
void write_quality_csv(const MeshQuality& q, const std::string& path);

} // namespace romforge

#endif
