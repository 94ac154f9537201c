#ifndef ROMFORGE_POD_HPP
#define ROMFORGE_POD_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "romforge/field.hpp"

namespace romforge {

enum class RomVariable : std::uint32_t { Pressure = 0, Velocity = 1, Wss = 2 };

std::string variable_name(RomVariable v);
FieldKind variable_kind(RomVariable v);

/// Column-stacked snapshots of one variable; vector fields flattened
/// component-interleaved, so a column is laid out exactly like
/// Field::values.
struct SnapshotMatrix {
    RomVariable variable = RomVariable::Pressure;
    Eigen::MatrixXd data; // N_dof x N
    std::vector<double> times;
    std::uint64_t mesh_checksum = 0;

    void validate() const;
};

SnapshotMatrix assemble_snapshots(const std::vector<Field>& snapshots,
                                  RomVariable variable);

enum class SvdMethod {
    Auto,          // Gram when N_dof >> N, direct otherwise
    GramSnapshots, // eigendecomposition of S^T S (method of snapshots)
    Direct,        // thin SVD by bidiagonalization
};

/// Energy criterion used by select_rank. SigmaLiteral is the plain
/// singular-value ratio; SigmaSquared is the squared-energy variant
/// (off by default).
enum class EnergyCriterion : std::uint32_t { SigmaLiteral = 0, SigmaSquared = 1 };

struct PodBasis {
    RomVariable variable = RomVariable::Pressure;
    Eigen::MatrixXd modes;           // N_dof x R, orthonormal columns
    Eigen::VectorXd singular_values; // full computed spectrum
    Eigen::VectorXd mean_shift;      // empty unless centering was requested
    int rank = 0;                    // L, set by truncate(); R after compute_pod
    double energy_delta = 1.0;
    EnergyCriterion criterion = EnergyCriterion::SigmaLiteral;
    std::uint64_t mesh_checksum = 0;

    auto retained_modes() const { return modes.leftCols(rank); }
};

/// Untruncated POD of the snapshot matrix. The numerical rank keeps
/// sigma_i > eps_rank * sigma_1. `center` subtracts the temporal mean
/// before decomposing (off by default; reconstruct adds it back).
PodBasis compute_pod(const SnapshotMatrix& S, double eps_rank = 1e-12,
                     SvdMethod method = SvdMethod::Auto, bool center = false);

/// Smallest L with sum_{i<=L} sigma_i / sum_i sigma_i >= delta (or the
/// sigma^2 ratio for the squared criterion). delta in (0, 1].
int select_rank(const Eigen::VectorXd& singular_values, double delta,
                EnergyCriterion criterion = EnergyCriterion::SigmaLiteral);

/// Copy of `basis` with rank chosen by the energy criterion and modes
/// truncated to that rank.
PodBasis truncate(const PodBasis& basis, double delta,
                  EnergyCriterion criterion = EnergyCriterion::SigmaLiteral);

/// Modal coefficients V^T x of a flattened snapshot.
Eigen::VectorXd project(const PodBasis& basis, const Eigen::VectorXd& snapshot);

/// Field values V a from length-rank coefficients.
Eigen::VectorXd reconstruct(const PodBasis& basis,
                            const Eigen::VectorXd& coefficients);

/// Binary basis container (spectrum, modes, delta, L, variable tag,
/// mesh checksum); bit-exact round trip.
void save_basis(const PodBasis& basis, const std::string& path);
PodBasis load_basis(const std::string& path);

/// CSV `index,sigma,cumulative_energy_sigma,cumulative_energy_sigma2`.
void write_spectrum_csv(const PodBasis& basis, const std::string& path);

} // namespace romforge

#endif
