#ifndef ROMFORGE_FIELD_IO_HPP
#define ROMFORGE_FIELD_IO_HPP

#include <string>

#include "romforge/field.hpp"

namespace romforge {

/// Binary field container, bit-exact across round trips.
/// Layout (little-endian):
///   bytes 0..3   magic "RFLD"
///   u32          version (1)
///   u32          kind
///   u64          entity count (cells, or wall faces for WallVector2)
///   u64          mesh checksum
///   f64          time
///   f64[...]     values, count x components
void write_field(const std::string& path, const Field& f);
Field read_field(const std::string& path);

/// Legacy ASCII VTK structured-grid export (one-way, for visualization).
/// Emits the mesh points plus one CELL_DATA entry per cell.
void write_vtk(const std::string& path, const StructuredMesh& mesh,
               const Field& f, const std::string& name);

/// 1D profile of a cell field along mesh row `j`: CSV columns
/// x,value (scalar) or x,vx,vy (vector).
void write_profile_csv(const std::string& path, const StructuredMesh& mesh,
                       const Field& f, int j);

} // namespace romforge

#endif
