#include "romforge/mesh.hpp"

#include <cmath>
#include <fstream>

namespace romforge {

namespace {

inline Vec2 perp(const Vec2& d) { return Vec2(d.y(), -d.x()); }

std::uint64_t fnv1a_init() { return 0xcbf29ce484222325ull; }

void fnv1a_feed(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
}

} // namespace

std::vector<int> StructuredMesh::wall_faces() const {
    std::vector<int> ids = wall_lower;
    ids.insert(ids.end(), wall_upper.begin(), wall_upper.end());
    return ids;
}

int StructuredMesh::n_boundary_faces() const {
    return static_cast<int>(inlet.size() + outlet.size() + wall_lower.size() +
                            wall_upper.size());
}

void StructuredMesh::recompute_geometry() {
    for (auto& f : faces) {
        const Vec2& a = vertices[f.va];
        const Vec2& b = vertices[f.vb];
        f.center = 0.5 * (a + b);
        f.area = perp(b - a);
    }
    cell_centers.assign(n_cells(), Vec2::Zero());
    cell_volumes.assign(n_cells(), 0.0);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            // counterclockwise quad corners
            const Vec2 q[4] = {vertices[vertex_index(i, j)],
                               vertices[vertex_index(i + 1, j)],
                               vertices[vertex_index(i + 1, j + 1)],
                               vertices[vertex_index(i, j + 1)]};
            double area2 = 0.0;
            Vec2 centroid = Vec2::Zero();
            for (int k = 0; k < 4; ++k) {
                const Vec2& p0 = q[k];
                const Vec2& p1 = q[(k + 1) % 4];
                const double cross = p0.x() * p1.y() - p1.x() * p0.y();
                area2 += cross;
                centroid += (p0 + p1) * cross;
            }
            const double vol = 0.5 * area2;
            const int c = cell_index(i, j);
            if (!(vol > 0.0)) {
                throw InvalidDeformationError(
                    "non-positive cell volume at cell (" + std::to_string(i) +
                    "," + std::to_string(j) + "): " + std::to_string(vol));
            }
            cell_volumes[c] = vol;
            cell_centers[c] = centroid / (6.0 * vol);
        }
    }
}

double StructuredMesh::max_closure_defect() const {
    std::vector<Vec2> sums(n_cells(), Vec2::Zero());
    for (const auto& f : faces) {
        sums[f.owner] += f.area;
        if (f.neighbour >= 0) sums[f.neighbour] -= f.area;
    }
    double worst = 0.0;
    for (const auto& s : sums) worst = std::max(worst, s.norm());
    return worst;
}

MeshQuality StructuredMesh::quality() const {
    MeshQuality q;
    q.min_volume = cell_volumes.empty() ? 0.0 : cell_volumes[0];
    for (double v : cell_volumes) q.min_volume = std::min(q.min_volume, v);
    for (const auto& f : faces) {
        if (f.neighbour < 0) continue;
        const Vec2 d = cell_centers[f.neighbour] - cell_centers[f.owner];
        const double dn = d.norm();
        const double an = f.area.norm();
        if (dn <= 0.0 || an <= 0.0) continue;
        double c = f.area.dot(d) / (an * dn);
        c = std::clamp(c, -1.0, 1.0);
        q.max_nonorthogonality_deg =
            std::max(q.max_nonorthogonality_deg, std::acos(c) * 180.0 / M_PI);
        const Vec2 mid = 0.5 * (cell_centers[f.owner] + cell_centers[f.neighbour]);
        q.max_skewness = std::max(q.max_skewness, (f.center - mid).norm() / dn);
    }
    return q;
}

std::uint64_t StructuredMesh::checksum() const {
    std::uint64_t h = fnv1a_init();
    const std::int64_t dims[2] = {nx, ny};
    fnv1a_feed(h, dims, sizeof(dims));
    for (const auto& v : vertices) {
        const double xy[2] = {v.x(), v.y()};
        fnv1a_feed(h, xy, sizeof(xy));
    }
    return h;
}

StructuredMesh build_channel_mesh(double length, double height, int nx, int ny) {
    if (!(length > 0.0) || !(height > 0.0)) {
        throw InvalidArgumentError("channel dimensions must be positive");
    }
    if (nx < 4 || ny < 4) {
        throw InvalidArgumentError("channel mesh requires nx, ny >= 4");
    }
    StructuredMesh m;
    m.nx = nx;
    m.ny = ny;
    m.vertices.resize(static_cast<std::size_t>(nx + 1) * (ny + 1));
    const double dx = length / nx;
    const double dy = height / ny;
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            m.vertices[m.vertex_index(i, j)] = Vec2(i * dx, j * dy);
        }
    }

    // vertical faces (between i-1 and i columns), then horizontal
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            Face f;
            if (i == 0) {
                f.owner = m.cell_index(0, j);
                f.va = m.vertex_index(0, j + 1); // outward = -x
                f.vb = m.vertex_index(0, j);
                m.inlet.push_back(static_cast<int>(m.faces.size()));
            } else if (i == nx) {
                f.owner = m.cell_index(nx - 1, j);
                f.va = m.vertex_index(nx, j); // outward = +x
                f.vb = m.vertex_index(nx, j + 1);
                m.outlet.push_back(static_cast<int>(m.faces.size()));
            } else {
                f.owner = m.cell_index(i - 1, j);
                f.neighbour = m.cell_index(i, j);
                f.va = m.vertex_index(i, j); // owner -> neighbour = +x
                f.vb = m.vertex_index(i, j + 1);
            }
            m.faces.push_back(f);
        }
    }
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            Face f;
            if (j == 0) {
                f.owner = m.cell_index(i, 0);
                f.va = m.vertex_index(i, 0); // outward = -y
                f.vb = m.vertex_index(i + 1, 0);
                m.wall_lower.push_back(static_cast<int>(m.faces.size()));
            } else if (j == ny) {
                f.owner = m.cell_index(i, ny - 1);
                f.va = m.vertex_index(i + 1, ny); // outward = +y
                f.vb = m.vertex_index(i, ny);
                m.wall_upper.push_back(static_cast<int>(m.faces.size()));
            } else {
                f.owner = m.cell_index(i, j - 1);
                f.neighbour = m.cell_index(i, j);
                f.va = m.vertex_index(i + 1, j); // owner -> neighbour = +y
                f.vb = m.vertex_index(i, j);
            }
            m.faces.push_back(f);
        }
    }
    m.recompute_geometry();
    return m;
}

void write_quality_csv(const MeshQuality& q, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open quality report for writing: " + path);
    out << "metric,value\n";
    out << "min_volume," << q.min_volume << "\n";
    out << "max_nonorthogonality_deg," << q.max_nonorthogonality_deg << "\n";
    out << "max_skewness," << q.max_skewness << "\n";
}

} // namespace romforge
