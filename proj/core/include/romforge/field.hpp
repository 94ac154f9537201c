#ifndef ROMFORGE_FIELD_HPP
#define ROMFORGE_FIELD_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "romforge/mesh.hpp"

namespace romforge {

enum class FieldKind : std::uint32_t {
    Scalar = 0,
    Vector2 = 1,
    WallVector2 = 2, // per-wall-face vectors in StructuredMesh::wall_faces() order
};

/// Discrete field on one mesh at one time instant. Scalar and Vector2
/// fields hold one (or two, component-interleaved: x0,y0,x1,y1,...)
/// values per cell; WallVector2 holds two values per wall face.
struct Field {
    FieldKind kind = FieldKind::Scalar;
    Eigen::VectorXd values;
    std::uint64_t mesh_checksum = 0;
    double time = 0.0;

    int components() const { return kind == FieldKind::Scalar ? 1 : 2; }

    static Field zeros(FieldKind kind, const StructuredMesh& mesh, double time = 0.0);

    double& scalar(int cell) { return values[cell]; }
    double scalar(int cell) const { return values[cell]; }
    Eigen::Vector2d vec(int cell) const {
        return Eigen::Vector2d(values[2 * cell], values[2 * cell + 1]);
    }
    void set_vec(int cell, const Eigen::Vector2d& v) {
        values[2 * cell] = v.x();
        values[2 * cell + 1] = v.y();
    }

    bool all_finite() const { return values.allFinite(); }
};

/// Wall traction samples tau . n (kinematic units m^2/s^2) on wall faces.
struct WssField {
    std::vector<int> face_ids; // mesh.wall_faces() order
    Eigen::VectorXd values;    // interleaved (x,y) per face
    std::uint64_t mesh_checksum = 0;
    double time = 0.0;

    Field as_field() const {
        Field f;
        f.kind = FieldKind::WallVector2;
        f.values = values;
        f.mesh_checksum = mesh_checksum;
        f.time = time;
        return f;
    }
};

/// Volume-weighted discrete L2 norm. WallVector2 fields are weighted by
/// wall-face area instead of cell volume.
double l2_norm(const Field& f, const StructuredMesh& mesh);

/// ||a - b|| / ||b|| in the volume-weighted L2 norm. Both fields must
/// live on `mesh` and share the same kind; throws
/// DegenerateReferenceError when ||b|| is zero.
double l2_relative_error(const Field& a, const Field& b, const StructuredMesh& mesh);

} // namespace romforge

#endif
