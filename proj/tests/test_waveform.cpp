#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "romforge/waveform.hpp"

using namespace romforge;
namespace fs = std::filesystem;

TEST(Waveform, NodeValuesAreExact) {
    const WaveformBc bc = default_pulse_waveform(0.8, 0.01, 41);
    for (std::size_t i = 0; i < bc.t.size(); ++i) {
        EXPECT_DOUBLE_EQ(inflow_rate(bc, bc.t[i]), bc.q[i]);
    }
}

TEST(Waveform, LinearInScaleFactor) {
    WaveformBc bc = default_pulse_waveform();
    WaveformBc scaled = bc;
    scaled.f = 4.0 / 3.0;
    for (double t : {0.0, 0.1, 0.37, 0.64, 0.799}) {
        EXPECT_NEAR(inflow_rate(scaled, t), (4.0 / 3.0) * inflow_rate(bc, t),
                    1e-15);
    }
}

TEST(Waveform, Periodicity) {
    const WaveformBc bc = default_pulse_waveform(0.8, 0.01, 41);
    for (double t0 : {0.0, 0.123, 0.512, 0.79}) {
        EXPECT_NEAR(inflow_rate(bc, 0.8 + t0), inflow_rate(bc, t0), 1e-14);
        EXPECT_NEAR(inflow_rate(bc, 4 * 0.8 + t0), inflow_rate(bc, t0), 1e-13);
    }
}

TEST(Waveform, PiecewiseLinearBetweenNodes) {
    const WaveformBc bc = default_pulse_waveform(0.8, 0.01, 41);
    const double tm = 0.5 * (bc.t[3] + bc.t[4]);
    EXPECT_NEAR(inflow_rate(bc, tm), 0.5 * (bc.q[3] + bc.q[4]), 1e-15);
}

TEST(Waveform, DefaultPulseIsTwoPhase) {
    const WaveformBc bc = default_pulse_waveform(0.8, 0.01, 161);
    // positive everywhere, diastolic peak near t/T = 0.65 higher than the
    // systolic plateau
    double qmin = bc.q[0], qmax = bc.q[0];
    std::size_t argmax = 0;
    for (std::size_t i = 0; i < bc.q.size(); ++i) {
        qmin = std::min(qmin, bc.q[i]);
        if (bc.q[i] > qmax) {
            qmax = bc.q[i];
            argmax = i;
        }
    }
    EXPECT_GT(qmin, 0.0);
    EXPECT_NEAR(bc.t[argmax] / 0.8, 0.65, 0.02);
    EXPECT_GT(qmax, 3.0 * qmin);
    EXPECT_DOUBLE_EQ(bc.q.front(), bc.q.back());
}

TEST(Waveform, EmptyTableRejected) {
    WaveformBc bc;
    EXPECT_THROW(inflow_rate(bc, 0.1), InvalidArgumentError);
}

TEST(Waveform, ValidationCatchesBadTables) {
    WaveformBc bc = default_pulse_waveform();
    bc.t[5] = bc.t[4]; // not strictly increasing
    EXPECT_THROW(bc.validate(), InvalidArgumentError);

    WaveformBc open_ended = default_pulse_waveform();
    open_ended.q.back() += 0.5;
    EXPECT_THROW(open_ended.validate(), InvalidArgumentError);

    WaveformBc bad_f = default_pulse_waveform();
    bad_f.f = 0.5; // outside [2/3, 4/3]
    EXPECT_THROW(bad_f.validate(), InvalidArgumentError);

    WaveformBc negative_t = default_pulse_waveform();
    EXPECT_THROW(inflow_rate(negative_t, -0.1), InvalidArgumentError);
}

TEST(Waveform, CsvRoundTrip) {
    fs::create_directories("tmp_waveform");
    const WaveformBc bc = default_pulse_waveform(0.8, 0.02, 33);
    save_waveform_csv(bc, "tmp_waveform/wave.csv");
    const WaveformBc loaded = load_waveform_csv("tmp_waveform/wave.csv");
    ASSERT_EQ(loaded.t.size(), bc.t.size());
    for (std::size_t i = 0; i < bc.t.size(); ++i) {
        EXPECT_DOUBLE_EQ(loaded.t[i], bc.t[i]);
        EXPECT_DOUBLE_EQ(loaded.q[i], bc.q[i]);
    }
}

TEST(Waveform, CsvRequiresHeader) {
    fs::create_directories("tmp_waveform");
    std::ofstream("tmp_waveform/bad.csv") << "0,0.01\n0.8,0.01\n";
    EXPECT_THROW(load_waveform_csv("tmp_waveform/bad.csv"), IoError);
    std::ofstream("tmp_waveform/bad2.csv") << "t,q\n0,abc\n";
    EXPECT_THROW(load_waveform_csv("tmp_waveform/bad2.csv"), IoError);
}
