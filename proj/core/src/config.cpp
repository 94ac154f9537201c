#include "romforge/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace romforge {

TrainConfig default_train_config(RomVariable v) {
    TrainConfig cfg;
    cfg.hidden_layers = 3;
    cfg.train_fraction = 0.95;
    cfg.optimizer = Optimizer::AdaptiveMoment;
    switch (v) {
    case RomVariable::Pressure:
        cfg.neurons_per_layer = 500;
        cfg.activation = Activation::Relu;
        cfg.epochs = 50000;
        cfg.learning_rate = 1.00e-6;
        break;
    case RomVariable::Velocity:
        cfg.neurons_per_layer = 850;
        cfg.activation = Activation::Tanh;
        cfg.epochs = 100000;
        cfg.learning_rate = 8.25e-6;
        break;
    case RomVariable::Wss:
        cfg.neurons_per_layer = 900;
        cfg.activation = Activation::Tanh;
        cfg.epochs = 100000;
        cfg.learning_rate = 5.50e-6;
        break;
    }
    return cfg;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

class KeyReader {
public:
    explicit KeyReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

    bool has(const std::string& key) {
        seen_.insert(key);
        return kv_.count(key) > 0;
    }
    std::string raw(const std::string& key) {
        seen_.insert(key);
        return kv_.at(key);
    }
    void get(const std::string& key, double& out) {
        if (!has(key)) return;
        out = parse_double(key);
    }
    void get(const std::string& key, int& out) {
        if (!has(key)) return;
        const double v = parse_double(key);
        out = static_cast<int>(std::lround(v));
    }
    void get(const std::string& key, std::uint64_t& out) {
        if (!has(key)) return;
        try {
            out = std::stoull(kv_.at(key));
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " is not an integer");
        }
    }
    void get(const std::string& key, bool& out) {
        if (!has(key)) return;
        const std::string v = kv_.at(key);
        if (v == "true" || v == "1") {
            out = true;
        } else if (v == "false" || v == "0") {
            out = false;
        } else {
            throw ConfigError("config key " + key + " must be true/false");
        }
    }
    void get(const std::string& key, std::string& out) {
        if (!has(key)) return;
        out = kv_.at(key);
    }
    void get_list(const std::string& key, std::vector<int>& out) {
        if (!has(key)) return;
        out = split_numbers<int>(key);
    }
    void get_list(const std::string& key, std::vector<double>& out) {
        if (!has(key)) return;
        out = split_numbers<double>(key);
    }

    void reject_unknown() const {
        for (const auto& [key, value] : kv_) {
            (void)value;
            if (!seen_.count(key)) {
                throw ConfigError("unknown config key: " + key);
            }
        }
    }

private:
    double parse_double(const std::string& key) {
        std::size_t pos = 0;
        double v = 0.0;
        const std::string& s = kv_.at(key);
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " is not numeric: " + s);
        }
        if (pos != s.size()) {
            throw ConfigError("config key " + key + " has trailing junk: " + s);
        }
        return v;
    }

    template <typename T>
    std::vector<T> split_numbers(const std::string& key) {
        std::vector<T> out;
        std::istringstream ss(kv_.at(key));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok = trim(tok);
            if (tok.empty()) continue;
            try {
                if constexpr (std::is_same_v<T, int>) {
                    out.push_back(std::stoi(tok));
                } else {
                    out.push_back(std::stod(tok));
                }
            } catch (const std::exception&) {
                throw ConfigError("config key " + key + " has a bad list entry: " +
                                  tok);
            }
        }
        if (out.empty()) throw ConfigError("config key " + key + " is an empty list");
        return out;
    }

    std::map<std::string, std::string> kv_;
    std::set<std::string> seen_;
};

Activation parse_activation(const std::string& v, const std::string& key) {
    if (v == "relu") return Activation::Relu;
    if (v == "tanh") return Activation::Tanh;
    throw ConfigError("config key " + key + " must be relu or tanh");
}

Optimizer parse_optimizer(const std::string& v, const std::string& key) {
    if (v == "sgd" || v == "plain") return Optimizer::PlainGradient;
    if (v == "momentum") return Optimizer::Momentum;
    if (v == "adam" || v == "adaptive") return Optimizer::AdaptiveMoment;
    throw ConfigError("config key " + key + " must be sgd, momentum or adam");
}

void read_ann_section(KeyReader& r, const std::string& prefix, TrainConfig& cfg) {
    r.get(prefix + ".neurons", cfg.neurons_per_layer);
    r.get(prefix + ".hidden_layers", cfg.hidden_layers);
    r.get(prefix + ".epochs", cfg.epochs);
    r.get(prefix + ".learning_rate", cfg.learning_rate);
    r.get(prefix + ".train_fraction", cfg.train_fraction);
    if (r.has(prefix + ".activation")) {
        cfg.activation = parse_activation(r.raw(prefix + ".activation"),
                                          prefix + ".activation");
    }
    if (r.has(prefix + ".optimizer")) {
        cfg.optimizer =
            parse_optimizer(r.raw(prefix + ".optimizer"), prefix + ".optimizer");
    }
}

} // namespace

WaveformBc ExperimentConfig::make_waveform() const {
    WaveformBc bc;
    if (waveform.kind == "default") {
        bc = default_pulse_waveform(solver.T, waveform.q_ref, waveform.samples);
    } else if (waveform.kind == "csv") {
        if (waveform.csv_path.empty()) {
            throw ConfigError("waveform.kind = csv requires waveform.csv_path");
        }
        bc = load_waveform_csv(waveform.csv_path);
    } else {
        throw ConfigError("waveform.kind must be default or csv");
    }
    bc.f = waveform.factor;
    bc.validate();
    return bc;
}

void ExperimentConfig::validate() const {
    try {
        SolverConfig resolved = solver;
        resolved.waveform = make_waveform();
        resolved.validate();
        for (const auto& cfg : ann) cfg.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (mesh.nx < 4 || mesh.ny < 4 || mesh.length <= 0 || mesh.height <= 0) {
        throw ConfigError("invalid mesh section");
    }
    if (!(pod.delta > 0.0 && pod.delta <= 1.0)) {
        throw ConfigError("pod.delta must lie in (0, 1]");
    }
    if (study.snapshot_counts.empty() || study.deltas.empty()) {
        throw ConfigError("study lists must be nonempty");
    }
    for (int n : study.snapshot_counts) {
        if (n < 2) throw ConfigError("study.snapshot_counts entries must be >= 2");
    }
    for (double d : study.deltas) {
        if (!(d > 0.0 && d <= 1.0)) {
            throw ConfigError("study.deltas entries must lie in (0, 1]");
        }
    }
    if (!(study.eval_time >= 0.0 && study.eval_time <= solver.T)) {
        throw ConfigError("study.eval_time must lie in [0, T]");
    }
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              " is not `key = value`: " + line);
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              " has an empty key or value");
        }
        if (kv.count(key)) {
            throw ConfigError("duplicate config key: " + key);
        }
        kv[key] = value;
    }

    ExperimentConfig cfg;
    cfg.config_hash = fnv1a(text);
    KeyReader r(std::move(kv));

    r.get("mesh.length", cfg.mesh.length);
    r.get("mesh.height", cfg.mesh.height);
    r.get("mesh.nx", cfg.mesh.nx);
    r.get("mesh.ny", cfg.mesh.ny);

    r.get("solver.nu", cfg.solver.nu);
    r.get("solver.dt", cfg.solver.dt);
    r.get("solver.T", cfg.solver.T);
    r.get("solver.n_cycles", cfg.solver.n_cycles);
    r.get("solver.piso_correctors", cfg.solver.piso_correctors);
    r.get("solver.linear_tol", cfg.solver.linear_tol);
    r.get("solver.div_tol", cfg.solver.div_tol);
    r.get("solver.max_linear_iter", cfg.solver.max_linear_iter);
    r.get("solver.snapshots", cfg.solver.snapshots_per_cycle);
    if (r.has("solver.inlet_profile")) {
        const std::string v = r.raw("solver.inlet_profile");
        if (v == "parabolic") {
            cfg.solver.inlet_profile = InletProfile::Parabolic;
        } else if (v == "uniform") {
            cfg.solver.inlet_profile = InletProfile::Uniform;
        } else {
            throw ConfigError("solver.inlet_profile must be parabolic or uniform");
        }
    }
    if (r.has("solver.pressure_ref")) {
        const std::string v = r.raw("solver.pressure_ref");
        if (v == "outlet_patch") {
            cfg.solver.pressure_ref = PressureRef::OutletPatch;
        } else if (v == "outlet_face") {
            cfg.solver.pressure_ref = PressureRef::OutletFace;
        } else if (v == "pin_cell") {
            cfg.solver.pressure_ref = PressureRef::PinCell;
        } else {
            throw ConfigError(
                "solver.pressure_ref must be outlet_patch, outlet_face or pin_cell");
        }
    }
    r.get("solver.pin_cell", cfg.solver.pin_cell);

    r.get("waveform.kind", cfg.waveform.kind);
    r.get("waveform.csv_path", cfg.waveform.csv_path);
    r.get("waveform.q_ref", cfg.waveform.q_ref);
    r.get("waveform.samples", cfg.waveform.samples);
    r.get("waveform.factor", cfg.waveform.factor);

    r.get("ffd.severity", cfg.ffd.severity);
    r.get("ffd.center_x", cfg.ffd.center_x);
    r.get("ffd.extent", cfg.ffd.extent);
    r.get("ffd.half_span", cfg.ffd.half_span);
    r.get_list("ffd.dims", cfg.ffd.dims);
    r.get_list("ffd.degrees", cfg.ffd.degrees);

    r.get("pod.delta", cfg.pod.delta);
    r.get("pod.eps_rank", cfg.pod.eps_rank);
    r.get("pod.center", cfg.pod.center);
    if (r.has("pod.criterion")) {
        const std::string v = r.raw("pod.criterion");
        if (v == "sigma") {
            cfg.pod.criterion = EnergyCriterion::SigmaLiteral;
        } else if (v == "sigma2") {
            cfg.pod.criterion = EnergyCriterion::SigmaSquared;
        } else {
            throw ConfigError("pod.criterion must be sigma or sigma2");
        }
    }
    if (r.has("pod.method")) {
        const std::string v = r.raw("pod.method");
        if (v == "auto") {
            cfg.pod.method = SvdMethod::Auto;
        } else if (v == "gram") {
            cfg.pod.method = SvdMethod::GramSnapshots;
        } else if (v == "direct") {
            cfg.pod.method = SvdMethod::Direct;
        } else {
            throw ConfigError("pod.method must be auto, gram or direct");
        }
    }

    read_ann_section(r, "ann.p", cfg.ann_for(RomVariable::Pressure));
    read_ann_section(r, "ann.u", cfg.ann_for(RomVariable::Velocity));
    read_ann_section(r, "ann.wss", cfg.ann_for(RomVariable::Wss));

    r.get_list("study.snapshot_counts", cfg.study.snapshot_counts);
    r.get_list("study.deltas", cfg.study.deltas);
    r.get("study.error_band", cfg.study.error_band);
    r.get("study.eval_time", cfg.study.eval_time);
    r.get("study.online_reps", cfg.study.online_reps);
    r.get("study.speedup_min", cfg.study.speedup_min);

    r.get("seed", cfg.seed);

    r.reject_unknown();

    for (auto& a : cfg.ann) a.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

} // namespace romforge
