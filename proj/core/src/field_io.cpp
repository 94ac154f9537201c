#include "romforge/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "field files are little-endian; big-endian hosts unsupported");

namespace romforge {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'L', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated field file while reading " + what);
    return v;
}

} // namespace

void write_field(const std::string& path, const Field& f) {
    if (!f.all_finite()) {
        throw IoError("refusing to write field with non-finite entries: " + path);
    }
    if (f.values.size() % f.components() != 0) {
        throw IoError("field value count inconsistent with kind: " + path);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open field file for writing: " + path);
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(f.kind));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(f.values.size() / f.components()));
    put<std::uint64_t>(out, f.mesh_checksum);
    put<double>(out, f.time);
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!out) throw IoError("short write on field file: " + path);
}

Field read_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open field file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("malformed field file header (bad magic): " + path);
    }
    const auto version = get<std::uint32_t>(in, "version");
    if (version != kVersion) {
        throw IoError("unsupported field file version in " + path);
    }
    const auto kind_raw = get<std::uint32_t>(in, "kind");
    if (kind_raw > 2) throw IoError("malformed field file (unknown kind): " + path);

    Field f;
    f.kind = static_cast<FieldKind>(kind_raw);
    const auto count = get<std::uint64_t>(in, "count");
    f.mesh_checksum = get<std::uint64_t>(in, "mesh checksum");
    f.time = get<double>(in, "time");

    const std::uint64_t n = count * f.components();
    f.values.resize(static_cast<Eigen::Index>(n));
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (static_cast<std::uint64_t>(in.gcount()) != n * sizeof(double)) {
        throw IoError("field file length mismatch (truncated payload): " + path);
    }
    if (!f.all_finite()) {
        throw IoError("field file contains non-finite entries: " + path);
    }
    return f;
}

void write_vtk(const std::string& path, const StructuredMesh& mesh,
               const Field& f, const std::string& name) {
    if (f.kind == FieldKind::WallVector2) {
        throw IoError("VTK export supports cell fields only");
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open VTK file for writing: " + path);
    out.precision(12);
    out << "# vtk DataFile Version 3.0\n";
    out << "romforge field export\n";
    out << "ASCII\n";
    out << "DATASET STRUCTURED_GRID\n";
    out << "DIMENSIONS " << mesh.nx + 1 << " " << mesh.ny + 1 << " 1\n";
    out << "POINTS " << mesh.n_vertices() << " double\n";
    for (const auto& v : mesh.vertices) {
        out << v.x() << " " << v.y() << " 0\n";
    }
    out << "CELL_DATA " << mesh.n_cells() << "\n";
    if (f.kind == FieldKind::Scalar) {
        out << "SCALARS " << name << " double 1\n";
        out << "LOOKUP_TABLE default\n";
        for (int c = 0; c < mesh.n_cells(); ++c) out << f.values[c] << "\n";
    } else {
        out << "VECTORS " << name << " double\n";
        for (int c = 0; c < mesh.n_cells(); ++c) {
            out << f.values[2 * c] << " " << f.values[2 * c + 1] << " 0\n";
        }
    }
}

void write_profile_csv(const std::string& path, const StructuredMesh& mesh,
                       const Field& f, int j) {
    if (j < 0 || j >= mesh.ny) throw InvalidArgumentError("profile row out of range");
    if (f.kind == FieldKind::WallVector2) {
        throw InvalidArgumentError("profile export supports cell fields only");
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open profile CSV for writing: " + path);
    out.precision(12);
    out << (f.kind == FieldKind::Scalar ? "x,value\n" : "x,vx,vy\n");
    for (int i = 0; i < mesh.nx; ++i) {
        const int c = mesh.cell_index(i, j);
        out << mesh.cell_centers[c].x();
        if (f.kind == FieldKind::Scalar) {
            out << "," << f.values[c];
        } else {
            out << "," << f.values[2 * c] << "," << f.values[2 * c + 1];
        }
        out << "\n";
    }
}

} // namespace romforge
