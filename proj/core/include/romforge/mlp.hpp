#ifndef ROMFORGE_MLP_HPP
#define ROMFORGE_MLP_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "romforge/errors.hpp"

namespace romforge {

enum class Activation : std::uint32_t { Relu = 0, Tanh = 1 };
enum class Optimizer : std::uint32_t {
    PlainGradient = 0,
    Momentum = 1,
    AdaptiveMoment = 2,
};

/// Invertible per-component affine normalization:
///   scaled = (x - offset) / scale.
struct AffineScaler {
    Eigen::VectorXd offset;
    Eigen::VectorXd scale;

    static AffineScaler identity(int n);
    void validate() const; // nonzero scales
    Eigen::VectorXd to_scaled(const Eigen::VectorXd& x) const;
    Eigen::VectorXd from_scaled(const Eigen::VectorXd& y) const;
};

/// Fully connected feedforward regressor with the chosen activation on
/// hidden layers and identity output. Inputs and outputs are in physical
/// units; the persisted scalers map to the normalized training space.
class MlpModel {
public:
    std::vector<int> layer_sizes; // input, hidden..., output
    std::vector<Eigen::MatrixXd> weights; // weights[l]: sizes[l+1] x sizes[l]
    std::vector<Eigen::VectorXd> biases;
    Activation activation = Activation::Tanh;
    AffineScaler input_scaler;
    AffineScaler output_scaler;

    int n_layers() const { return static_cast<int>(weights.size()); }
    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    void validate() const;

    /// Physical input -> physical output (scalers applied both ends).
    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

    /// Batch forward in scaled space: columns are samples.
    Eigen::MatrixXd forward_scaled(const Eigen::MatrixXd& x_scaled) const;
};

/// Uniform fan-in initialization: weights ~ U(-b, b) with
/// b = sqrt(6 / fan_in), biases zero, deterministic per seed.
MlpModel init_mlp(const std::vector<int>& layer_sizes, Activation activation,
                  std::uint64_t seed);

/// Time -> modal-coefficient samples with train/validation index masks.
struct CoefficientDataset {
    Eigen::VectorXd inputs;  // times, length N
    Eigen::MatrixXd targets; // L x N
    std::vector<int> train_indices;
    std::vector<int> validation_indices;

    int size() const { return static_cast<int>(inputs.size()); }
    void validate() const;
};

/// Random disjoint masks of sizes round(f*N) and N - round(f*N), drawn
/// with the given seed. Throws when either partition is empty.
void split_dataset(CoefficientDataset& dataset, double train_fraction,
                   std::uint64_t seed);

struct TrainConfig {
    int epochs = 20000;
    double learning_rate = 1e-3;
    int neurons_per_layer = 64;
    int hidden_layers = 3;
    Activation activation = Activation::Tanh;
    double train_fraction = 0.95;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::AdaptiveMoment;
    double momentum = 0.9;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
    std::vector<int> layer_sizes(int n_outputs) const;
};

/// Mean over masked samples and output components of the squared error,
/// measured in scaled target space.
double mse_loss(const MlpModel& model, const CoefficientDataset& dataset,
                const std::vector<int>& mask);

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

/// Gradients of mse_loss over the masked samples with respect to every
/// weight and bias.
Gradients backward(const MlpModel& model, const CoefficientDataset& dataset,
                   const std::vector<int>& mask);

struct TrainHistory {
    std::vector<double> train_loss; // one entry per epoch
    std::vector<double> val_loss;
};

/// Full-batch training with the configured optimizer. Fits the scalers
/// from the training split (time to [0,1], each coefficient standardized
/// by train mean/std), then minimizes the scaled-space MSE. Deterministic
/// per seed; raises DivergenceError if the loss becomes non-finite.
TrainHistory train(MlpModel& model, const CoefficientDataset& dataset,
                   const TrainConfig& cfg);

/// Binary model container: layer sizes, activation tag, scalers,
/// weights; bit-exact round trip.
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

/// CSV `epoch,train_loss,val_loss`.
void write_loss_csv(const TrainHistory& history, const std::string& path);

} // namespace romforge

#endif
