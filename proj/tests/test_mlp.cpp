#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "romforge/mlp.hpp"
#include "romforge/rng.hpp"

using namespace romforge;
namespace fs = std::filesystem;

namespace {

CoefficientDataset toy_dataset(int n, int n_out, std::uint64_t seed,
                               bool split = true) {
    CoefficientDataset ds;
    ds.inputs.resize(n);
    ds.targets.resize(n_out, n);
    Rng rng(seed);
    for (int k = 0; k < n; ++k) {
        ds.inputs[k] = static_cast<double>(k) / (n - 1);
        for (int j = 0; j < n_out; ++j) {
            ds.targets(j, k) = std::sin(2 * M_PI * ds.inputs[k] * (j + 1)) +
                               0.1 * rng.uniform(-1, 1);
        }
    }
    if (split) {
        split_dataset(ds, 0.9, seed);
    } else {
        ds.train_indices.resize(n);
        for (int k = 0; k < n; ++k) ds.train_indices[k] = k;
    }
    return ds;
}

// independent scalar re-implementation of the forward pass
Eigen::VectorXd naive_forward(const MlpModel& m, double t) {
    std::vector<double> a = {(t - m.input_scaler.offset[0]) /
                             m.input_scaler.scale[0]};
    for (int l = 0; l < m.n_layers(); ++l) {
        std::vector<double> z(m.layer_sizes[l + 1], 0.0);
        for (std::size_t j = 0; j < z.size(); ++j) {
            z[j] = m.biases[l][static_cast<Eigen::Index>(j)];
            for (std::size_t k = 0; k < a.size(); ++k) {
                z[j] += m.weights[l](static_cast<Eigen::Index>(j),
                                     static_cast<Eigen::Index>(k)) *
                        a[k];
            }
            if (l + 1 < m.n_layers()) {
                z[j] = m.activation == Activation::Relu ? std::max(0.0, z[j])
                                                        : std::tanh(z[j]);
            }
        }
        a = std::move(z);
    }
    Eigen::VectorXd out(m.output_size());
    for (int j = 0; j < m.output_size(); ++j) {
        out[j] = m.output_scaler.offset[j] + m.output_scaler.scale[j] * a[j];
    }
    return out;
}

} // namespace

TEST(InitMlp, DeterministicPerSeed) {
    const std::vector<int> sizes = {1, 16, 16, 4};
    const MlpModel a = init_mlp(sizes, Activation::Tanh, 99);
    const MlpModel b = init_mlp(sizes, Activation::Tanh, 99);
    const MlpModel c = init_mlp(sizes, Activation::Tanh, 100);
    for (int l = 0; l < a.n_layers(); ++l) {
        EXPECT_EQ(a.weights[l], b.weights[l]);
    }
    EXPECT_NE(a.weights[0], c.weights[0]);
}

TEST(InitMlp, BiasesZeroAndWeightsBounded) {
    const std::vector<int> sizes = {1, 32, 8};
    const MlpModel m = init_mlp(sizes, Activation::Relu, 5);
    for (int l = 0; l < m.n_layers(); ++l) {
        EXPECT_EQ(m.biases[l].cwiseAbs().maxCoeff(), 0.0);
        const double bound = std::sqrt(6.0 / m.layer_sizes[l]);
        EXPECT_LE(m.weights[l].cwiseAbs().maxCoeff(), bound);
        EXPECT_GT(m.weights[l].cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(InitMlp, ZeroWidthLayerRejected) {
    EXPECT_THROW(init_mlp({1, 0, 4}, Activation::Tanh, 1), InvalidArgumentError);
    EXPECT_THROW(init_mlp({1}, Activation::Tanh, 1), InvalidArgumentError);
}

TEST(Forward, ZeroNetworkReturnsOutputScalerOffset) {
    MlpModel m = init_mlp({1, 8, 3}, Activation::Tanh, 7);
    for (auto& w : m.weights) w.setZero();
    for (auto& b : m.biases) b.setZero();
    m.output_scaler.offset << 1.5, -2.0, 0.25;
    Eigen::VectorXd x(1);
    x << 0.7;
    const Eigen::VectorXd y = m.forward(x);
    EXPECT_EQ(y[0], 1.5);
    EXPECT_EQ(y[1], -2.0);
    EXPECT_EQ(y[2], 0.25);
}

TEST(Forward, HandConstructedAffineMapIsExact) {
    MlpModel m;
    m.layer_sizes = {1, 2};
    m.activation = Activation::Tanh; // irrelevant: no hidden layer
    Eigen::MatrixXd w(2, 1);
    w << 3.0, -1.0;
    m.weights = {w};
    Eigen::VectorXd b(2);
    b << 0.5, 2.0;
    m.biases = {b};
    m.input_scaler = AffineScaler::identity(1);
    m.output_scaler = AffineScaler::identity(2);
    for (double t : {-1.0, 0.0, 0.3, 2.5}) {
        Eigen::VectorXd x(1);
        x << t;
        const Eigen::VectorXd y = m.forward(x);
        EXPECT_DOUBLE_EQ(y[0], 3.0 * t + 0.5);
        EXPECT_DOUBLE_EQ(y[1], -1.0 * t + 2.0);
    }
}

TEST(Forward, MatchesIndependentReEvaluation) {
    MlpModel m = init_mlp({1, 12, 9, 5}, Activation::Tanh, 21);
    m.input_scaler.offset[0] = 0.2;
    m.input_scaler.scale[0] = 0.6;
    Rng rng(3);
    for (int j = 0; j < 5; ++j) {
        m.output_scaler.offset[j] = rng.uniform(-1, 1);
        m.output_scaler.scale[j] = 0.5 + rng.uniform();
    }
    for (double t : {0.2, 0.35, 0.5, 0.8}) { // includes the scaler midpoint
        Eigen::VectorXd x(1);
        x << t;
        const Eigen::VectorXd y = m.forward(x);
        const Eigen::VectorXd z = naive_forward(m, t);
        EXPECT_LE((y - z).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Forward, NonFiniteInputRejected) {
    const MlpModel m = init_mlp({1, 4, 2}, Activation::Relu, 1);
    Eigen::VectorXd x(1);
    x << std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(m.forward(x), InvalidArgumentError);
}

TEST(Scalers, ForwardInverseIsIdentity) {
    Rng rng(11);
    AffineScaler s;
    s.offset.resize(6);
    s.scale.resize(6);
    for (int i = 0; i < 6; ++i) {
        s.offset[i] = rng.uniform(-3, 3);
        s.scale[i] = 0.1 + rng.uniform();
    }
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd x(6);
        for (int i = 0; i < 6; ++i) x[i] = rng.uniform(-5, 5);
        const Eigen::VectorXd y = s.from_scaled(s.to_scaled(x));
        EXPECT_LE((y - x).cwiseAbs().maxCoeff(), 1e-12);
    }
    AffineScaler bad = AffineScaler::identity(2);
    bad.scale[1] = 0.0;
    EXPECT_THROW(bad.validate(), InvalidArgumentError);
}

TEST(MseLoss, HandComputedCases) {
    // perfect model on its own outputs
    MlpModel m = init_mlp({1, 6, 2}, Activation::Tanh, 3);
    CoefficientDataset ds;
    ds.inputs.resize(3);
    ds.inputs << 0.0, 0.5, 1.0;
    ds.targets.resize(2, 3);
    for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd x(1);
        x << ds.inputs[k];
        ds.targets.col(k) = m.forward(x);
    }
    ds.train_indices = {0, 1, 2};
    EXPECT_NEAR(mse_loss(m, ds, ds.train_indices), 0.0, 1e-24);

    // constant-zero model against unit targets: loss 1 in scaled space
    for (auto& w : m.weights) w.setZero();
    for (auto& b : m.biases) b.setZero();
    m.input_scaler = AffineScaler::identity(1);
    m.output_scaler = AffineScaler::identity(2);
    ds.targets.setOnes();
    EXPECT_DOUBLE_EQ(mse_loss(m, ds, ds.train_indices), 1.0);

    // two-sample toy set, arithmetic oracle
    MlpModel lin;
    lin.layer_sizes = {1, 1};
    lin.activation = Activation::Tanh;
    Eigen::MatrixXd w(1, 1);
    w << 2.0;
    lin.weights = {w};
    lin.biases = {Eigen::VectorXd::Zero(1)};
    lin.input_scaler = AffineScaler::identity(1);
    lin.output_scaler = AffineScaler::identity(1);
    CoefficientDataset toy;
    toy.inputs.resize(2);
    toy.inputs << 1.0, 2.0;
    toy.targets.resize(1, 2);
    toy.targets << 3.0, 3.0; // residuals: 2*1-3 = -1, 2*2-3 = 1
    toy.train_indices = {0, 1};
    EXPECT_DOUBLE_EQ(mse_loss(lin, toy, toy.train_indices), 1.0);

    EXPECT_THROW(mse_loss(lin, toy, {}), InvalidArgumentError);
}

TEST(Backward, MatchesCentralFiniteDifferences) {
    MlpModel m = init_mlp({1, 16, 16, 4}, Activation::Tanh, 17);
    CoefficientDataset ds = toy_dataset(12, 4, 17, false);
    const Gradients g = backward(m, ds, ds.train_indices);

    const double h = 1e-6;
    double max_rel = 0.0;
    for (int l = 0; l < m.n_layers(); ++l) {
        for (Eigen::Index idx = 0; idx < m.weights[l].size(); ++idx) {
            double* p = m.weights[l].data() + idx;
            const double save = *p;
            *p = save + h;
            const double lp = mse_loss(m, ds, ds.train_indices);
            *p = save - h;
            const double lm = mse_loss(m, ds, ds.train_indices);
            *p = save;
            const double fd = (lp - lm) / (2 * h);
            const double an = g.weights[l](idx);
            max_rel = std::max(max_rel,
                               std::abs(an - fd) / std::max(1e-8, std::abs(fd)));
        }
        for (Eigen::Index idx = 0; idx < m.biases[l].size(); ++idx) {
            double* p = m.biases[l].data() + idx;
            const double save = *p;
            *p = save + h;
            const double lp = mse_loss(m, ds, ds.train_indices);
            *p = save - h;
            const double lm = mse_loss(m, ds, ds.train_indices);
            *p = save;
            const double fd = (lp - lm) / (2 * h);
            max_rel = std::max(max_rel, std::abs(g.biases[l](idx) - fd) /
                                            std::max(1e-8, std::abs(fd)));
        }
    }
    EXPECT_LE(max_rel, 1e-5);
}

TEST(Backward, FiveSeedGradientProperty) {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        MlpModel m = init_mlp({1, 8, 6, 3}, seed % 2 ? Activation::Tanh
                                                     : Activation::Relu,
                              seed);
        // keep ReLU away from the kink for clean finite differences
        for (auto& b : m.biases) b.array() += 0.05;
        CoefficientDataset ds = toy_dataset(9, 3, seed, false);
        const Gradients g = backward(m, ds, ds.train_indices);
        const double h = 1e-6;
        double max_rel = 0.0;
        for (int l = 0; l < m.n_layers(); ++l) {
            for (Eigen::Index idx = 0; idx < m.weights[l].size(); idx += 7) {
                double* p = m.weights[l].data() + idx;
                const double save = *p;
                *p = save + h;
                const double lp = mse_loss(m, ds, ds.train_indices);
                *p = save - h;
                const double lm = mse_loss(m, ds, ds.train_indices);
                *p = save;
                const double fd = (lp - lm) / (2 * h);
                max_rel =
                    std::max(max_rel, std::abs(g.weights[l](idx) - fd) /
                                          std::max(1e-7, std::abs(fd)));
            }
        }
        EXPECT_LE(max_rel, 1e-5) << "seed " << seed;
    }
}

TEST(Backward, ZeroResidualGivesZeroGradients) {
    MlpModel m = init_mlp({1, 5, 2}, Activation::Tanh, 2);
    CoefficientDataset ds;
    ds.inputs.resize(4);
    ds.inputs << 0.1, 0.3, 0.6, 0.9;
    ds.targets.resize(2, 4);
    for (int k = 0; k < 4; ++k) {
        Eigen::VectorXd x(1);
        x << ds.inputs[k];
        ds.targets.col(k) = m.forward(x);
    }
    ds.train_indices = {0, 1, 2, 3};
    const Gradients g = backward(m, ds, ds.train_indices);
    for (int l = 0; l < m.n_layers(); ++l) {
        EXPECT_LE(g.weights[l].cwiseAbs().maxCoeff(), 1e-14);
        EXPECT_LE(g.biases[l].cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Backward, GradientScalesLinearlyWithResidual) {
    // zero model: residual is -target, so doubling the targets doubles
    // the gradient of the quadratic loss
    MlpModel m = init_mlp({1, 4, 2}, Activation::Tanh, 6);
    for (auto& w : m.weights) w.setZero();
    for (auto& b : m.biases) b.setZero();
    CoefficientDataset ds = toy_dataset(6, 2, 8, false);
    const Gradients g1 = backward(m, ds, ds.train_indices);
    ds.targets *= 2.0;
    const Gradients g2 = backward(m, ds, ds.train_indices);
    for (int l = 0; l < m.n_layers(); ++l) {
        EXPECT_LE((g2.biases[l] - 2.0 * g1.biases[l]).cwiseAbs().maxCoeff(),
                  1e-12);
        EXPECT_LE((g2.weights[l] - 2.0 * g1.weights[l]).cwiseAbs().maxCoeff(),
                  1e-12);
    }
}

TEST(SplitDataset, PaperSplitSizesExact) {
    CoefficientDataset ds = toy_dataset(100, 2, 1, false);
    split_dataset(ds, 0.95, 42);
    EXPECT_EQ(ds.train_indices.size(), 95u);
    EXPECT_EQ(ds.validation_indices.size(), 5u);
}

TEST(SplitDataset, DeterministicDisjointExhaustive) {
    CoefficientDataset a = toy_dataset(37, 2, 1, false);
    CoefficientDataset b = toy_dataset(37, 2, 1, false);
    split_dataset(a, 0.8, 7);
    split_dataset(b, 0.8, 7);
    EXPECT_EQ(a.train_indices, b.train_indices);
    EXPECT_EQ(a.validation_indices, b.validation_indices);

    std::vector<char> seen(37, 0);
    for (int i : a.train_indices) seen[i] += 1;
    for (int i : a.validation_indices) seen[i] += 1;
    for (char c : seen) EXPECT_EQ(c, 1);

    CoefficientDataset c = toy_dataset(37, 2, 1, false);
    split_dataset(c, 0.8, 8);
    EXPECT_NE(a.train_indices, c.train_indices);
}

TEST(SplitDataset, EmptyPartitionRejected) {
    CoefficientDataset ds = toy_dataset(10, 2, 1, false);
    EXPECT_THROW(split_dataset(ds, 0.01, 1), InvalidArgumentError);
    EXPECT_THROW(split_dataset(ds, 0.999, 1), InvalidArgumentError);
}

TEST(Train, LinearTargetLinearNetConverges) {
    CoefficientDataset ds;
    const int n = 20;
    ds.inputs.resize(n);
    ds.targets.resize(2, n);
    for (int k = 0; k < n; ++k) {
        ds.inputs[k] = static_cast<double>(k) / (n - 1);
        ds.targets(0, k) = 2.0 * ds.inputs[k] + 1.0;
        ds.targets(1, k) = -0.5 * ds.inputs[k] + 0.2;
    }
    split_dataset(ds, 0.9, 1);
    MlpModel m = init_mlp({1, 2}, Activation::Tanh, 1);
    TrainConfig cfg;
    cfg.epochs = 4000;
    cfg.learning_rate = 0.5;
    cfg.optimizer = Optimizer::PlainGradient;
    cfg.hidden_layers = 0;
    const TrainHistory hist = train(m, ds, cfg);
    EXPECT_LE(hist.train_loss.back(), 1e-10);
    EXPECT_LE(hist.val_loss.back(), 1e-9);
}

TEST(Train, ZeroLearningRateFreezesLoss) {
    CoefficientDataset ds = toy_dataset(16, 3, 5);
    MlpModel m = init_mlp({1, 8, 3}, Activation::Tanh, 5);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.learning_rate = 0.0;
    cfg.optimizer = Optimizer::PlainGradient;
    const TrainHistory hist = train(m, ds, cfg);
    for (double l : hist.train_loss) {
        EXPECT_DOUBLE_EQ(l, hist.train_loss.front());
    }
}

TEST(Train, DeterministicRetrainingIsBitIdentical) {
    for (Optimizer opt : {Optimizer::PlainGradient, Optimizer::Momentum,
                          Optimizer::AdaptiveMoment}) {
        CoefficientDataset ds = toy_dataset(24, 2, 9);
        TrainConfig cfg;
        cfg.epochs = 200;
        cfg.learning_rate = 1e-3;
        cfg.optimizer = opt;
        cfg.seed = 9;
        MlpModel a = init_mlp({1, 10, 2}, Activation::Tanh, cfg.seed);
        MlpModel b = init_mlp({1, 10, 2}, Activation::Tanh, cfg.seed);
        train(a, ds, cfg);
        train(b, ds, cfg);
        for (int l = 0; l < a.n_layers(); ++l) {
            ASSERT_EQ(std::memcmp(a.weights[l].data(), b.weights[l].data(),
                                  sizeof(double) * a.weights[l].size()),
                      0);
            ASSERT_EQ(std::memcmp(a.biases[l].data(), b.biases[l].data(),
                                  sizeof(double) * a.biases[l].size()),
                      0);
        }
    }
}

TEST(Train, DivergenceRaisesWithEpochIndex) {
    CoefficientDataset ds = toy_dataset(16, 2, 3);
    MlpModel m = init_mlp({1, 8, 2}, Activation::Relu, 3);
    TrainConfig cfg;
    cfg.epochs = 500;
    cfg.learning_rate = 1e8;
    cfg.optimizer = Optimizer::PlainGradient;
    try {
        train(m, ds, cfg);
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError& e) {
        EXPECT_GE(e.epoch, 1);
        EXPECT_LT(e.epoch, 500);
    }
}

TEST(Train, SineFitSanity) {
    // universal-fit check: one tanh hidden layer of 64 neurons on
    // sin(2 pi t)
    const int n = 128;
    CoefficientDataset ds;
    ds.inputs.resize(n);
    ds.targets.resize(1, n);
    for (int k = 0; k < n; ++k) {
        ds.inputs[k] = static_cast<double>(k) / (n - 1);
        ds.targets(0, k) = std::sin(2 * M_PI * ds.inputs[k]);
    }
    split_dataset(ds, 0.95, 11);
    TrainConfig cfg;
    cfg.epochs = 20000;
    cfg.learning_rate = 3e-3;
    cfg.neurons_per_layer = 64;
    cfg.hidden_layers = 1;
    cfg.activation = Activation::Tanh;
    cfg.seed = 11;
    MlpModel m = init_mlp(cfg.layer_sizes(1), cfg.activation, cfg.seed);
    train(m, ds, cfg);
    double max_err = 0.0;
    for (int k = 0; k <= 1000; ++k) {
        const double t = k / 1000.0;
        Eigen::VectorXd x(1);
        x << t;
        max_err = std::max(max_err,
                           std::abs(m.forward(x)[0] - std::sin(2 * M_PI * t)));
    }
    EXPECT_LE(max_err, 1e-2);
}

TEST(ModelIo, RoundTripIsBitExact) {
    fs::create_directories("tmp_mlp");
    CoefficientDataset ds = toy_dataset(20, 3, 13);
    MlpModel m = init_mlp({1, 12, 3}, Activation::Relu, 13);
    TrainConfig cfg;
    cfg.epochs = 100;
    cfg.learning_rate = 1e-3;
    train(m, ds, cfg);
    save_model(m, "tmp_mlp/model.bin");
    const MlpModel loaded = load_model("tmp_mlp/model.bin");
    EXPECT_EQ(loaded.layer_sizes, m.layer_sizes);
    EXPECT_EQ(loaded.activation, m.activation);
    for (int l = 0; l < m.n_layers(); ++l) {
        ASSERT_EQ(std::memcmp(loaded.weights[l].data(), m.weights[l].data(),
                              sizeof(double) * m.weights[l].size()),
                  0);
    }
    EXPECT_EQ(std::memcmp(loaded.output_scaler.scale.data(),
                          m.output_scaler.scale.data(), 3 * sizeof(double)),
              0);
    // a truncated file is rejected
    fs::resize_file("tmp_mlp/model.bin", 40);
    EXPECT_THROW(load_model("tmp_mlp/model.bin"), IoError);
}

TEST(TrainHistory, LossCsvFormat) {
    fs::create_directories("tmp_mlp");
    TrainHistory hist;
    hist.train_loss = {1.0, 0.5};
    hist.val_loss = {1.1, 0.6};
    write_loss_csv(hist, "tmp_mlp/loss.csv");
    std::ifstream in("tmp_mlp/loss.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "epoch,train_loss,val_loss");
    std::getline(in, line);
    EXPECT_EQ(line, "0,1,1.1000000000000001");
}
