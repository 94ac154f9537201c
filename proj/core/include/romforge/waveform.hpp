#ifndef ROMFORGE_WAVEFORM_HPP
#define ROMFORGE_WAVEFORM_HPP

#include <string>
#include <vector>

#include "romforge/errors.hpp"

namespace romforge {

/// Tabulated periodic flow-rate waveform q(t) = f * qbar(t mod T), with
/// piecewise-linear interpolation between samples. Sample times cover
/// [0, T] with qbar(0) == qbar(T); the scale factor f lives in
/// [2/3, 4/3].
struct WaveformBc {
    std::vector<double> t;
    std::vector<double> q; // m^3/s per unit depth
    double f = 1.0;

    double period() const { return t.empty() ? 0.0 : t.back(); }
    void validate() const;
};

/// f * qbar(t mod T). Requires t >= 0 and a valid table.
double inflow_rate(const WaveformBc& bc, double time);

/// Synthetic two-phase pulse: a broad low systolic phase and a higher
/// diastolic peak at t/T ~ 0.65, built from four aligned harmonics so
/// the table is exactly periodic and strictly positive:
///   qbar(theta)/q_ref = 0.45 + sum_k a_k cos(2 pi k (theta-0.65)),
///   a = (0.33, 0.15, 0.068, 0.031).
/// This is a stand-in curve, not a measured one.
WaveformBc default_pulse_waveform(double period = 0.8, double q_ref = 0.01,
                                  int samples = 41);

/// CSV with required header line `t,q`.
WaveformBc load_waveform_csv(const std::string& path);
void save_waveform_csv(const WaveformBc& bc, const std::string& path);

} // namespace romforge

#endif
