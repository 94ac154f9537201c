#include "romforge/field.hpp"

#include <cmath>

namespace romforge {

Field Field::zeros(FieldKind kind, const StructuredMesh& mesh, double time) {
    Field f;
    f.kind = kind;
    f.mesh_checksum = mesh.checksum();
    f.time = time;
    const int n = kind == FieldKind::WallVector2
                      ? static_cast<int>(mesh.wall_faces().size())
                      : mesh.n_cells();
    f.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n) * f.components());
    return f;
}

namespace {

double weighted_sq(const Field& f, const StructuredMesh& mesh) {
    double acc = 0.0;
    if (f.kind == FieldKind::WallVector2) {
        const auto ids = mesh.wall_faces();
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const double w = mesh.faces[ids[k]].area.norm();
            const double x = f.values[2 * k];
            const double y = f.values[2 * k + 1];
            acc += w * (x * x + y * y);
        }
        return acc;
    }
    const int c = f.components();
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        double sq = 0.0;
        for (int d = 0; d < c; ++d) {
            const double v = f.values[c * cell + d];
            sq += v * v;
        }
        acc += mesh.cell_volumes[cell] * sq;
    }
    return acc;
}

void check_compatible(const Field& a, const Field& b, const StructuredMesh& mesh) {
    const std::uint64_t cs = mesh.checksum();
    if (a.mesh_checksum != cs || b.mesh_checksum != cs) {
        throw InvalidArgumentError("field/mesh checksum mismatch in norm computation");
    }
    if (a.kind != b.kind || a.values.size() != b.values.size()) {
        throw InvalidArgumentError("fields differ in kind or size");
    }
}

} // namespace

double l2_norm(const Field& f, const StructuredMesh& mesh) {
    return std::sqrt(weighted_sq(f, mesh));
}

double l2_relative_error(const Field& a, const Field& b, const StructuredMesh& mesh) {
    check_compatible(a, b, mesh);
    const double nb = l2_norm(b, mesh);
    if (nb == 0.0) {
        throw DegenerateReferenceError("reference field has zero L2 norm");
    }
    Field diff = a;
    diff.values -= b.values;
    return l2_norm(diff, mesh) / nb;
}

} // namespace romforge
