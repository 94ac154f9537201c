#include "romforge/waveform.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace romforge {

void WaveformBc::validate() const {
    if (t.empty() || q.empty()) {
        throw InvalidArgumentError("waveform table is empty");
    }
    if (t.size() != q.size()) {
        throw InvalidArgumentError("waveform table has mismatched columns");
    }
    if (t.size() < 2) {
        throw InvalidArgumentError("waveform table needs at least two samples");
    }
    if (t.front() != 0.0) {
        throw InvalidArgumentError("waveform samples must start at t = 0");
    }
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (!(t[i] > t[i - 1])) {
            throw InvalidArgumentError("waveform sample times must strictly increase");
        }
    }
    if (std::abs(q.front() - q.back()) > 1e-12 * std::max(1.0, std::abs(q.front()))) {
        throw InvalidArgumentError("waveform must close periodically: q(0) == q(T)");
    }
    if (f < 2.0 / 3.0 - 1e-12 || f > 4.0 / 3.0 + 1e-12) {
        throw InvalidArgumentError("waveform scale factor must lie in [2/3, 4/3]");
    }
}

double inflow_rate(const WaveformBc& bc, double time) {
    bc.validate();
    if (time < 0.0) throw InvalidArgumentError("inflow_rate requires t >= 0");
    const double T = bc.period();
    double tau = std::fmod(time, T);
    if (tau < 0.0) tau += T;
    // binary search for the containing segment
    std::size_t lo = 0;
    std::size_t hi = bc.t.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (bc.t[mid] <= tau) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double w = (tau - bc.t[lo]) / (bc.t[hi] - bc.t[lo]);
    return bc.f * ((1.0 - w) * bc.q[lo] + w * bc.q[hi]);
}

WaveformBc default_pulse_waveform(double period, double q_ref, int samples) {
    if (!(period > 0.0) || !(q_ref > 0.0) || samples < 3) {
        throw InvalidArgumentError("invalid default waveform parameters");
    }
    WaveformBc bc;
    bc.t.resize(samples);
    bc.q.resize(samples);
    const double two_pi = 2.0 * M_PI;
    // four aligned harmonics: broad low systolic phase, diastolic peak
    // at t/T = 0.65, strictly positive
    static constexpr double kAmp[4] = {0.33, 0.15, 0.068, 0.031};
    for (int i = 0; i < samples; ++i) {
        const double theta = static_cast<double>(i) / (samples - 1);
        const double phase = theta - 0.65;
        double q = 0.45;
        for (int k = 0; k < 4; ++k) {
            q += kAmp[k] * std::cos((k + 1) * two_pi * phase);
        }
        bc.t[i] = theta * period;
        bc.q[i] = q_ref * q;
    }
    bc.q[samples - 1] = bc.q[0]; // exact periodic closure
    return bc;
}

WaveformBc load_waveform_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open waveform CSV: " + path);
    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "t,q") {
        throw IoError("waveform CSV must start with header line `t,q`: " + path);
    }
    WaveformBc bc;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        double vals[2];
        for (int k = 0; k < 2; ++k) {
            if (!std::getline(ss, tok, ',')) {
                throw IoError("waveform CSV line " + std::to_string(lineno) +
                              " has too few columns");
            }
            try {
                vals[k] = std::stod(tok);
            } catch (const std::exception&) {
                throw IoError("waveform CSV line " + std::to_string(lineno) +
                              " is not numeric");
            }
        }
        bc.t.push_back(vals[0]);
        bc.q.push_back(vals[1]);
    }
    bc.validate();
    return bc;
}

void save_waveform_csv(const WaveformBc& bc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open waveform CSV for writing: " + path);
    out.precision(17);
    out << "t,q\n";
    for (std::size_t i = 0; i < bc.t.size(); ++i) {
        out << bc.t[i] << "," << bc.q[i] << "\n";
    }
}

} // namespace romforge
