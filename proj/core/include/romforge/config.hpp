#ifndef ROMFORGE_CONFIG_HPP
#define ROMFORGE_CONFIG_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "romforge/ffd.hpp"
#include "romforge/fv.hpp"
#include "romforge/mlp.hpp"
#include "romforge/pod.hpp"

namespace romforge {

/// Table-scale training defaults per variable: pressure 500 neurons,
/// ReLU, 50000 epochs, lr 1.00e-6; velocity 850, Tanh, 100000, 8.25e-6;
/// WSS 900, Tanh, 100000, 5.50e-6; 3 hidden layers each. Desk-scale
/// configs override these (the learning rates assume a particular data
/// normalization and rarely transfer).
TrainConfig default_train_config(RomVariable v);

struct MeshSection {
    double length = 1.0;
    double height = 0.2;
    int nx = 64;
    int ny = 32;
};

struct WaveformSection {
    std::string kind = "default"; // "default" | "csv"
    std::string csv_path;
    double q_ref = 0.01;
    int samples = 41;
    double factor = 1.0; // the per-run scale f in [2/3, 4/3]
};

struct FfdSection {
    double severity = 0.7;
    double center_x = 0.5;
    double extent = 0.3;
    double half_span = 0.3;
    std::vector<int> dims = {7, 5};
    std::vector<int> degrees = {2, 2};
};

struct PodSection {
    double delta = 0.99;
    EnergyCriterion criterion = EnergyCriterion::SigmaLiteral;
    double eps_rank = 1e-12;
    bool center = false;
    SvdMethod method = SvdMethod::Auto;
};

struct StudySection {
    std::vector<int> snapshot_counts = {100, 200, 400};
    std::vector<double> deltas = {0.90, 0.95, 0.99};
    double error_band = 2.0;  // max/min time-averaged error ratio across N
    double eval_time = 0.64;  // figure snapshot at t/T = 0.8 of a 0.8 s cycle
    int online_reps = 100;
    double speedup_min = 100.0;
};

/// Parsed `section.key = value` experiment configuration. Unknown keys
/// are rejected.
struct ExperimentConfig {
    MeshSection mesh;
    SolverConfig solver;
    WaveformSection waveform;
    FfdSection ffd;
    PodSection pod;
    std::array<TrainConfig, 3> ann = {
        default_train_config(RomVariable::Pressure),
        default_train_config(RomVariable::Velocity),
        default_train_config(RomVariable::Wss),
    };
    StudySection study;
    std::uint64_t seed = 0;

    std::uint64_t config_hash = 0; // FNV-1a over the raw config text

    TrainConfig& ann_for(RomVariable v) { return ann[static_cast<int>(v)]; }
    const TrainConfig& ann_for(RomVariable v) const {
        return ann[static_cast<int>(v)];
    }

    /// Resolve the waveform section into the solver config.
    WaveformBc make_waveform() const;
    void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

} // namespace romforge

#endif
