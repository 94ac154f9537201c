#include "romforge/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "romforge/rng.hpp"

namespace romforge {

AffineScaler AffineScaler::identity(int n) {
    AffineScaler s;
    s.offset = Eigen::VectorXd::Zero(n);
    s.scale = Eigen::VectorXd::Ones(n);
    return s;
}

void AffineScaler::validate() const {
    if (offset.size() != scale.size()) {
        throw InvalidArgumentError("scaler offset/scale size mismatch");
    }
    if ((scale.array() == 0.0).any()) {
        throw InvalidArgumentError("scaler must be invertible (nonzero scale)");
    }
}

Eigen::VectorXd AffineScaler::to_scaled(const Eigen::VectorXd& x) const {
    return (x - offset).cwiseQuotient(scale);
}

Eigen::VectorXd AffineScaler::from_scaled(const Eigen::VectorXd& y) const {
    return offset + scale.cwiseProduct(y);
}

void MlpModel::validate() const {
    if (layer_sizes.size() < 2) {
        throw InvalidArgumentError("network needs input and output layers");
    }
    for (int s : layer_sizes) {
        if (s < 1) throw InvalidArgumentError("zero-width layer");
    }
    if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size()) {
        throw InvalidArgumentError("layer count mismatch");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != layer_sizes[l + 1] ||
            weights[l].cols() != layer_sizes[l] ||
            biases[l].size() != layer_sizes[l + 1]) {
            throw InvalidArgumentError("weight shape inconsistent at layer " +
                                       std::to_string(l));
        }
    }
    input_scaler.validate();
    output_scaler.validate();
    if (input_scaler.offset.size() != layer_sizes.front() ||
        output_scaler.offset.size() != layer_sizes.back()) {
        throw InvalidArgumentError("scaler width does not match network");
    }
}

namespace {

inline Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
    if (act == Activation::Relu) return z.cwiseMax(0.0);
    return z.array().tanh().matrix();
}

inline Eigen::MatrixXd activate_deriv(const Eigen::MatrixXd& a, Activation act) {
    // derivative expressed through the activation output
    if (act == Activation::Relu) {
        return (a.array() > 0.0).cast<double>().matrix();
    }
    return (1.0 - a.array().square()).matrix();
}

} // namespace

Eigen::MatrixXd MlpModel::forward_scaled(const Eigen::MatrixXd& x_scaled) const {
    Eigen::MatrixXd a = x_scaled;
    const int n = n_layers();
    for (int l = 0; l < n; ++l) {
        Eigen::MatrixXd z = (weights[l] * a).colwise() + biases[l];
        a = (l + 1 < n) ? activate(z, activation) : std::move(z);
    }
    return a;
}

Eigen::VectorXd MlpModel::forward(const Eigen::VectorXd& x) const {
    if (!x.allFinite()) {
        throw InvalidArgumentError("non-finite network input");
    }
    const Eigen::VectorXd xs = input_scaler.to_scaled(x);
    const Eigen::MatrixXd ys = forward_scaled(xs);
    return output_scaler.from_scaled(ys.col(0));
}

MlpModel init_mlp(const std::vector<int>& layer_sizes, Activation activation,
                  std::uint64_t seed) {
    MlpModel m;
    m.layer_sizes = layer_sizes;
    m.activation = activation;
    if (layer_sizes.size() < 2) {
        throw InvalidArgumentError("network needs input and output layers");
    }
    for (int s : layer_sizes) {
        if (s < 1) throw InvalidArgumentError("zero-width layer");
    }
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / fan_in);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int c = 0; c < fan_in; ++c) {
            for (int r = 0; r < fan_out; ++r) {
                w(r, c) = rng.uniform(-bound, bound);
            }
        }
        m.weights.push_back(std::move(w));
        m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    m.input_scaler = AffineScaler::identity(layer_sizes.front());
    m.output_scaler = AffineScaler::identity(layer_sizes.back());
    m.validate();
    return m;
}

void CoefficientDataset::validate() const {
    if (targets.cols() != inputs.size()) {
        throw InvalidArgumentError("one target per input required");
    }
    std::vector<char> seen(size(), 0);
    for (int i : train_indices) {
        if (i < 0 || i >= size() || seen[i]) {
            throw InvalidArgumentError("invalid or duplicated train index");
        }
        seen[i] = 1;
    }
    for (int i : validation_indices) {
        if (i < 0 || i >= size() || seen[i]) {
            throw InvalidArgumentError("split masks must be disjoint");
        }
        seen[i] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw InvalidArgumentError("split masks must be exhaustive");
    }
}

void split_dataset(CoefficientDataset& dataset, double train_fraction,
                   std::uint64_t seed) {
    const int n = dataset.size();
    if (n < 2) throw InvalidArgumentError("need at least two samples to split");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw InvalidArgumentError("train fraction must lie in (0, 1)");
    }
    const int n_train = static_cast<int>(std::lround(train_fraction * n));
    if (n_train == 0 || n_train == n) {
        throw InvalidArgumentError("train fraction yields an empty partition");
    }
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_index(i + 1));
        std::swap(idx[i], idx[j]);
    }
    dataset.train_indices.assign(idx.begin(), idx.begin() + n_train);
    dataset.validation_indices.assign(idx.begin() + n_train, idx.end());
    std::sort(dataset.train_indices.begin(), dataset.train_indices.end());
    std::sort(dataset.validation_indices.begin(), dataset.validation_indices.end());
    dataset.validate();
}

namespace {

struct ScaledBatch {
    Eigen::MatrixXd x; // in x m
    Eigen::MatrixXd y; // out x m
};

ScaledBatch gather_scaled(const MlpModel& model, const CoefficientDataset& ds,
                          const std::vector<int>& mask) {
    ScaledBatch b;
    const int m = static_cast<int>(mask.size());
    b.x.resize(model.input_size(), m);
    b.y.resize(model.output_size(), m);
    for (int k = 0; k < m; ++k) {
        Eigen::VectorXd xin(1);
        xin[0] = ds.inputs[mask[k]];
        b.x.col(k) = model.input_scaler.to_scaled(xin);
        b.y.col(k) = model.output_scaler.to_scaled(ds.targets.col(mask[k]));
    }
    return b;
}

} // namespace

double mse_loss(const MlpModel& model, const CoefficientDataset& dataset,
                const std::vector<int>& mask) {
    if (mask.empty()) throw InvalidArgumentError("empty mask in mse_loss");
    const ScaledBatch b = gather_scaled(model, dataset, mask);
    const Eigen::MatrixXd pred = model.forward_scaled(b.x);
    const double denom =
        static_cast<double>(mask.size()) * model.output_size();
    return (pred - b.y).squaredNorm() / denom;
}

Gradients backward(const MlpModel& model, const CoefficientDataset& dataset,
                   const std::vector<int>& mask) {
    if (mask.empty()) throw InvalidArgumentError("empty batch in backward");
    const ScaledBatch batch = gather_scaled(model, dataset, mask);
    const int n = model.n_layers();

    // forward pass keeping activations
    std::vector<Eigen::MatrixXd> acts(n + 1);
    acts[0] = batch.x;
    for (int l = 0; l < n; ++l) {
        Eigen::MatrixXd z = (model.weights[l] * acts[l]).colwise() + model.biases[l];
        acts[l + 1] = (l + 1 < n) ? activate(z, model.activation) : std::move(z);
    }

    const double denom =
        static_cast<double>(mask.size()) * model.output_size();
    Eigen::MatrixXd delta = 2.0 * (acts[n] - batch.y) / denom;

    Gradients g;
    g.weights.resize(n);
    g.biases.resize(n);
    for (int l = n - 1; l >= 0; --l) {
        g.weights[l] = delta * acts[l].transpose();
        g.biases[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = (model.weights[l].transpose() * delta)
                        .cwiseProduct(activate_deriv(acts[l], model.activation));
        }
    }
    return g;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidArgumentError("epochs must be >= 1");
    if (!(learning_rate >= 0.0)) {
        throw InvalidArgumentError("learning rate must be non-negative");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw InvalidArgumentError("train fraction must lie in (0, 1)");
    }
    if (neurons_per_layer < 1 || hidden_layers < 0) {
        throw InvalidArgumentError("invalid network shape");
    }
}

std::vector<int> TrainConfig::layer_sizes(int n_outputs) const {
    std::vector<int> sizes;
    sizes.push_back(1);
    for (int l = 0; l < hidden_layers; ++l) sizes.push_back(neurons_per_layer);
    sizes.push_back(n_outputs);
    return sizes;
}

TrainHistory train(MlpModel& model, const CoefficientDataset& dataset,
                   const TrainConfig& cfg) {
    cfg.validate();
    dataset.validate();
    model.validate();
    if (dataset.train_indices.empty()) {
        throw InvalidArgumentError("dataset has no training split");
    }

    // fit scalers on the training split: time to [0,1], coefficients
    // standardized per component
    const auto& tr = dataset.train_indices;
    double t_lo = dataset.inputs[tr[0]], t_hi = dataset.inputs[tr[0]];
    for (int i : tr) {
        t_lo = std::min(t_lo, dataset.inputs[i]);
        t_hi = std::max(t_hi, dataset.inputs[i]);
    }
    model.input_scaler.offset = Eigen::VectorXd::Constant(1, t_lo);
    model.input_scaler.scale =
        Eigen::VectorXd::Constant(1, t_hi > t_lo ? t_hi - t_lo : 1.0);

    const int n_out = model.output_size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n_out);
    for (int i : tr) mean += dataset.targets.col(i);
    mean /= static_cast<double>(tr.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(n_out);
    for (int i : tr) {
        var += (dataset.targets.col(i) - mean).array().square().matrix();
    }
    var /= static_cast<double>(tr.size());
    model.output_scaler.offset = mean;
    model.output_scaler.scale = var.array().sqrt().max(1e-300).matrix();
    for (int c = 0; c < n_out; ++c) {
        if (model.output_scaler.scale[c] < 1e-14 * (1.0 + std::abs(mean[c]))) {
            model.output_scaler.scale[c] = 1.0; // constant coefficient
        }
    }

    const ScaledBatch batch = gather_scaled(model, dataset, tr);
    const double denom = static_cast<double>(tr.size()) * n_out;

    const int n = model.n_layers();
    std::vector<Eigen::MatrixXd> vel_w(n), m1_w(n), m2_w(n);
    std::vector<Eigen::VectorXd> vel_b(n), m1_b(n), m2_b(n);
    for (int l = 0; l < n; ++l) {
        vel_w[l] = Eigen::MatrixXd::Zero(model.weights[l].rows(),
                                         model.weights[l].cols());
        m1_w[l] = vel_w[l];
        m2_w[l] = vel_w[l];
        vel_b[l] = Eigen::VectorXd::Zero(model.biases[l].size());
        m1_b[l] = vel_b[l];
        m2_b[l] = vel_b[l];
    }

    TrainHistory hist;
    hist.train_loss.reserve(cfg.epochs);
    hist.val_loss.reserve(cfg.epochs);
    std::vector<Eigen::MatrixXd> acts(n + 1);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        acts[0] = batch.x;
        for (int l = 0; l < n; ++l) {
            Eigen::MatrixXd z =
                (model.weights[l] * acts[l]).colwise() + model.biases[l];
            acts[l + 1] = (l + 1 < n) ? activate(z, model.activation) : std::move(z);
        }
        const double loss = (acts[n] - batch.y).squaredNorm() / denom;
        if (!std::isfinite(loss)) {
            throw DivergenceError("training loss became non-finite at epoch " +
                                      std::to_string(epoch),
                                  epoch);
        }
        hist.train_loss.push_back(loss);
        hist.val_loss.push_back(
            dataset.validation_indices.empty()
                ? loss
                : mse_loss(model, dataset, dataset.validation_indices));

        Eigen::MatrixXd delta = 2.0 * (acts[n] - batch.y) / denom;
        for (int l = n - 1; l >= 0; --l) {
            const Eigen::MatrixXd gw = delta * acts[l].transpose();
            const Eigen::VectorXd gb = delta.rowwise().sum();
            if (l > 0) {
                delta = (model.weights[l].transpose() * delta)
                            .cwiseProduct(activate_deriv(acts[l], model.activation));
            }
            switch (cfg.optimizer) {
            case Optimizer::PlainGradient:
                model.weights[l] -= cfg.learning_rate * gw;
                model.biases[l] -= cfg.learning_rate * gb;
                break;
            case Optimizer::Momentum:
                vel_w[l] = cfg.momentum * vel_w[l] + gw;
                vel_b[l] = cfg.momentum * vel_b[l] + gb;
                model.weights[l] -= cfg.learning_rate * vel_w[l];
                model.biases[l] -= cfg.learning_rate * vel_b[l];
                break;
            case Optimizer::AdaptiveMoment: {
                const double t = epoch + 1;
                const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
                const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
                m1_w[l] = cfg.adam_beta1 * m1_w[l] + (1.0 - cfg.adam_beta1) * gw;
                m2_w[l] = cfg.adam_beta2 * m2_w[l] +
                          (1.0 - cfg.adam_beta2) * gw.cwiseProduct(gw);
                m1_b[l] = cfg.adam_beta1 * m1_b[l] + (1.0 - cfg.adam_beta1) * gb;
                m2_b[l] = cfg.adam_beta2 * m2_b[l] +
                          (1.0 - cfg.adam_beta2) * gb.cwiseProduct(gb);
                model.weights[l].array() -=
                    cfg.learning_rate * (m1_w[l].array() / bc1) /
                    ((m2_w[l].array() / bc2).sqrt() + cfg.adam_eps);
                model.biases[l].array() -=
                    cfg.learning_rate * (m1_b[l].array() / bc1) /
                    ((m2_b[l].array() / bc2).sqrt() + cfg.adam_eps);
                break;
            }
            }
        }
    }
    return hist;
}

namespace {

constexpr char kMagic[4] = {'R', 'M', 'L', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated model file while reading " + what);
    return v;
}

void put_vector(std::ofstream& out, const Eigen::VectorXd& v) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Eigen::VectorXd get_vector(std::ifstream& in, const std::string& what) {
    const auto n = get<std::uint64_t>(in, what);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw IoError("truncated model file while reading " + what);
    return v;
}

} // namespace

void save_model(const MlpModel& model, const std::string& path) {
    model.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open model file for writing: " + path);
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.activation));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.layer_sizes.size()));
    for (int s : model.layer_sizes) put<std::uint64_t>(out, s);
    put_vector(out, model.input_scaler.offset);
    put_vector(out, model.input_scaler.scale);
    put_vector(out, model.output_scaler.offset);
    put_vector(out, model.output_scaler.scale);
    for (int l = 0; l < model.n_layers(); ++l) {
        out.write(reinterpret_cast<const char*>(model.weights[l].data()),
                  static_cast<std::streamsize>(model.weights[l].size() *
                                               sizeof(double)));
        put_vector(out, model.biases[l]);
    }
    if (!out) throw IoError("short write on model file: " + path);
}

MlpModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("malformed model file header (bad magic): " + path);
    }
    if (get<std::uint32_t>(in, "version") != kVersion) {
        throw IoError("unsupported model file version in " + path);
    }
    MlpModel m;
    m.activation = static_cast<Activation>(get<std::uint32_t>(in, "activation"));
    const auto n_layers = get<std::uint32_t>(in, "layer count");
    m.layer_sizes.resize(n_layers);
    for (auto& s : m.layer_sizes) {
        s = static_cast<int>(get<std::uint64_t>(in, "layer size"));
    }
    m.input_scaler.offset = get_vector(in, "input scaler offset");
    m.input_scaler.scale = get_vector(in, "input scaler scale");
    m.output_scaler.offset = get_vector(in, "output scaler offset");
    m.output_scaler.scale = get_vector(in, "output scaler scale");
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        Eigen::MatrixXd w(m.layer_sizes[l + 1], m.layer_sizes[l]);
        in.read(reinterpret_cast<char*>(w.data()),
                static_cast<std::streamsize>(w.size() * sizeof(double)));
        if (!in) throw IoError("truncated model file while reading weights");
        m.weights.push_back(std::move(w));
        m.biases.push_back(get_vector(in, "biases"));
    }
    m.validate();
    return m;
}

void write_loss_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open loss CSV for writing: " + path);
    out.precision(17);
    out << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        out << e << "," << history.train_loss[e] << "," << history.val_loss[e]
            << "\n";
    }
}

} // namespace romforge
