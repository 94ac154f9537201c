#ifndef ROMFORGE_PIPELINE_HPP
#define ROMFORGE_PIPELINE_HPP

#include <array>
#include <string>
#include <vector>

#include "romforge/config.hpp"
#include "romforge/ffd.hpp"
#include "romforge/fv.hpp"
#include "romforge/mlp.hpp"
#include "romforge/pod.hpp"

namespace romforge {

/// Worker count for study and training fan-out: ROMFORGE_THREADS when
/// set, hardware concurrency otherwise. Results never depend on it.
int worker_count();

/// Offline products for one configuration: per-variable POD basis and
/// coefficient regressor plus provenance.
struct RomArtifacts {
    std::array<PodBasis, 3> bases;  // indexed by RomVariable
    std::array<MlpModel, 3> models;
    std::uint64_t mesh_checksum = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    double cycle_period = 0.0;
    std::string created; // ISO timestamp, manifest only

    const PodBasis& basis(RomVariable v) const {
        return bases[static_cast<int>(v)];
    }
    const MlpModel& model(RomVariable v) const {
        return models[static_cast<int>(v)];
    }
    /// Rank/width and checksum consistency across all artifacts.
    void validate() const;
};

void save_artifacts(const RomArtifacts& artifacts, const std::string& out_dir);
RomArtifacts load_artifacts(const std::string& out_dir);

/// Build the channel mesh and deform it per the ffd section. Returns the
/// solver mesh, the displaced lattice and the quality report.
struct GeometryResult {
    StructuredMesh mesh;
    FfdLattice lattice;
    MeshQuality quality;
};
GeometryResult make_geometry(const ExperimentConfig& cfg);

struct OfflineResult {
    RomArtifacts artifacts;
    StructuredMesh mesh;
    std::vector<SnapshotRecord> snapshots;
    std::array<CoefficientDataset, 3> datasets;
    std::array<TrainHistory, 3> histories;
};

/// FFD -> FOM -> POD -> training, persisting everything under `out_dir`
/// (layout: snapshots/, basis/, models/, reports/, fields/ with a
/// manifest at the root). Byte-identical artifact files for identical
/// config and seed.
OfflineResult offline(const ExperimentConfig& cfg, const std::string& out_dir);

struct OnlineResult {
    Field p;
    Field u;
    Field wss;
    double wall_seconds = 0.0; // reconstruction time, excludes IO
    bool extrapolated = false; // t_new outside [0, T]
};

/// Reconstruct all variables at t_new from the trained artifacts.
/// Refuses artifacts whose mesh checksum does not match `mesh`.
OnlineResult online_evaluate(const RomArtifacts& artifacts,
                             const StructuredMesh& mesh, double t_new);

struct StudyRow {
    double time = 0.0;
    bool heldout = false;
    std::array<double, 3> error{}; // per RomVariable
};

struct StudyRun {
    int n_snapshots = 0;
    double delta = 1.0;
    std::array<int, 3> ranks{};
    std::vector<StudyRow> rows;
    std::array<double, 3> time_avg_error{};
    std::array<double, 3> heldout_avg_error{};
};

struct StudyReport {
    std::vector<StudyRun> runs;
    bool passed = false;
    std::string summary;
};

/// Full offline+online run per snapshot count; per-run time-resolved
/// errors go to reports/errors_N<count>.csv. Passes when, per variable,
/// max/min time-averaged error across counts stays within
/// study.error_band.
StudyReport study_snapshot_convergence(const ExperimentConfig& cfg,
                                       const std::string& out_dir);

/// Full offline+online run per energy threshold. Passes when
/// time-averaged errors are non-increasing in delta.
StudyReport study_mode_convergence(const ExperimentConfig& cfg,
                                   const std::string& out_dir);

struct SpeedupReport {
    double fom_cycle_seconds = 0.0;
    double fom_cycle_seconds_repeat = 0.0;
    double online_mean_seconds = 0.0;
    double online_median_seconds = 0.0;
    double online_stddev_seconds = 0.0;
    double speedup = 0.0;
    bool passed = false;
};

/// Wall time of one FOM cycle (after warm-up, measured twice) against
/// the mean online evaluation time over study.online_reps calls spread
/// over the cycle. Passes when the ratio is at least study.speedup_min.
SpeedupReport report_speedup(const RomArtifacts& artifacts,
                             const ExperimentConfig& cfg,
                             const std::string& out_dir);

} // namespace romforge

#endif
