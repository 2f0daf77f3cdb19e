#include <doctest.h>

#include <cmath>

#include "scepipe/sync.hpp"
#include "scepipe/synth.hpp"

#include "test_util.hpp"

using namespace scepipe;
using scepipe::test::thrownCode;

namespace {

// Independent oracles: plain per-sample loops, no Eigen reductions.
double naiveBlockMean(const Series& samples, int block, int w) {
    double sum = 0.0;
    for (int i = 0; i < w; ++i) sum += samples(block * w + i);
    return sum / w;
}

double naiveBlockIntegral(const Series& omega, int block, int w, double fs) {
    double sum = 0.0;
    for (int i = 0; i < w; ++i) sum += omega(block * w + i) / fs;
    return sum;
}

Eigen::Index naiveArgmaxAbs(const Series& series) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < series.size(); ++i)
        if (std::abs(series(i)) > std::abs(series(best))) best = i;
    return best;
}

Series randomSeries(DeterministicRng& rng, Eigen::Index n, double scale) {
    Series series(n);
    for (Eigen::Index i = 0; i < n; ++i) series(i) = (rng.nextUnit() - 0.5) * 2.0 * scale;
    return series;
}

} // namespace

TEST_SUITE_BEGIN("sync");

TEST_CASE("event timestamp of an impulse at sample 520") {
    Series series = Series::Zero(1600);
    series(520) = -11.3;
    CHECK(detectEventTimestamp(series) == doctest::Approx(5.20).epsilon(1e-12));
    CHECK(naiveArgmaxAbs(series) == 520);
}

TEST_CASE("event timestamp tie-breaking") {
    CHECK(detectEventTimestamp(Series::Zero(1600)) == 0.0); // all-zero: earliest tie

    Series series = Series::Zero(1600);
    series(300) = 8.0;  // 3.00 s
    series(900) = -8.0; // 9.00 s, same magnitude
    CHECK(detectEventTimestamp(series) == doctest::Approx(3.00).epsilon(1e-12));
}

TEST_CASE("event timestamp respects start time and errors on empty input") {
    Series series = Series::Zero(10);
    series(4) = 1.0;
    CHECK(detectEventTimestamp(series, 100.0, 2.0) == doctest::Approx(2.04));
    CHECK(thrownCode([] { detectEventTimestamp(Series(0)); }) == Errc::EmptySeries);
}

TEST_CASE("event timestamp is invariant under sign flip") {
    DeterministicRng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const Series series = randomSeries(rng, 600, 12.0);
        const Series flipped = -series;
        CHECK(detectEventTimestamp(series) == detectEventTimestamp(flipped));
        const Eigen::Index oracle = naiveArgmaxAbs(series);
        CHECK(detectEventTimestamp(series) == doctest::Approx(oracle / 100.0).epsilon(1e-15));
    }
}

TEST_CASE("window clamps to the clip and keeps exactly 6 s") {
    const EventWindow mid = clampEventWindow(8.0, 16.0);
    CHECK(mid.t_start == doctest::Approx(4.0));
    CHECK(mid.t_end == doctest::Approx(10.0));

    const EventWindow early = clampEventWindow(1.0, 16.0);
    CHECK(early.t_start == doctest::Approx(0.0));
    CHECK(early.t_end == doctest::Approx(6.0));

    const EventWindow late = clampEventWindow(15.5, 16.0);
    CHECK(late.t_start == doctest::Approx(10.0));
    CHECK(late.t_end == doctest::Approx(16.0));

    CHECK(thrownCode([] { clampEventWindow(3.0, 5.9); }) == Errc::ClipTooShort);

    DeterministicRng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const double duration = 6.0 + rng.nextUnit() * 20.0;
        const double t_event = rng.nextUnit() * duration;
        const EventWindow window = clampEventWindow(t_event, duration);
        CHECK(window.width() == doctest::Approx(6.0).epsilon(1e-12));
        CHECK(window.t_start >= -1e-12);
        CHECK(window.t_end <= duration + 1e-12);
    }
}

TEST_CASE("frame indices follow round((t_start+(k-1)/3)*fps)") {
    const EventWindow window = clampEventWindow(8.0, 16.0); // t_start 4.0
    const FrameIndices indices = selectFrameIndices(window, 30.0, 480);
    for (int k = 1; k <= kFrameCount; ++k) {
        const long expected = std::llround((4.0 + (k - 1) / 3.0) * 30.0);
        CHECK(indices[static_cast<std::size_t>(k - 1)] == expected);
    }
    CHECK(indices.front() == 120);
    CHECK(indices[1] == 130);
    CHECK(indices.back() == 290);
}

TEST_CASE("frame indices from the clip start form the 0,10,...,170 progression") {
    const EventWindow window = clampEventWindow(0.0, 16.0);
    const FrameIndices indices = selectFrameIndices(window, 30.0, 480);
    for (int k = 0; k < kFrameCount; ++k)
        CHECK(indices[static_cast<std::size_t>(k)] == 10L * k);
}

TEST_CASE("frame indices are 18, clamped and non-decreasing") {
    DeterministicRng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const double duration = 6.0 + rng.nextUnit() * 14.0;
        const double fps = 5.0 + rng.nextUnit() * 55.0;
        const long total = std::max(1L, static_cast<long>(std::llround(duration * fps)));
        const EventWindow window = clampEventWindow(rng.nextUnit() * duration, duration);
        const FrameIndices indices = selectFrameIndices(window, fps, total);
        CHECK(indices.size() == 18);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            CHECK(indices[i] >= 0);
            CHECK(indices[i] < total);
            if (i > 0) CHECK(indices[i] >= indices[i - 1]);
        }
    }
}

TEST_CASE("block size is 33 at the 100 Hz / 3 fps defaults") {
    const SyncConfig cfg;
    CHECK(cfg.blockSize() == 33);
    CHECK(cfg.windowSamples() == 594);
}

TEST_CASE("block average of a constant series is the constant") {
    SeriesX3 samples(594, 3);
    samples.col(0).setConstant(-3.5);
    samples.col(1).setConstant(0.25);
    samples.col(2).setConstant(9.81);
    const FrameArray3 out = blockAverageAccel(samples);
    for (int k = 0; k < kFrameCount; ++k) {
        CHECK(out(k, 0) == doctest::Approx(-3.5).epsilon(1e-15));
        CHECK(out(k, 1) == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(out(k, 2) == doctest::Approx(9.81).epsilon(1e-15));
    }
}

TEST_CASE("first block of 1..33 averages to 17") {
    Series samples(594);
    for (Eigen::Index i = 0; i < samples.size(); ++i)
        samples(i) = static_cast<double>(i + 1); // a_raw[n] = n, 1-based
    double oracle = 0.0;
    for (int n = 1; n <= 33; ++n) oracle += n;
    oracle /= 33.0;
    CHECK(oracle == 17.0);
    CHECK(blockAverage(samples)(0) == doctest::Approx(17.0).epsilon(1e-15));
}

TEST_CASE("short windows are rejected") {
    CHECK(thrownCode([] { blockAverage(Series::Zero(593)); }) == Errc::WindowTooShort);
    CHECK(thrownCode([] { integrateGyroZ(Series::Zero(100)); }) == Errc::WindowTooShort);
}

TEST_CASE("trailing samples beyond 18 blocks are discarded") {
    Series samples = Series::Zero(600);
    samples.tail(6).setConstant(1e6); // samples 595..600 of the 6 s window
    const FrameArray out = blockAverage(samples);
    for (int k = 0; k < kFrameCount; ++k) CHECK(out(k) == 0.0);
}

TEST_CASE("constant yaw rate integrates to 2.97 degrees per frame") {
    Series omega = Series::Constant(594, 9.0);
    const FrameArray out = integrateGyroZ(omega);
    double oracle = 0.0;
    for (int n = 0; n < 33; ++n) oracle += 9.0 / 100.0;
    CHECK(oracle == doctest::Approx(2.97).epsilon(1e-12));
    for (int k = 0; k < kFrameCount; ++k)
        CHECK(out(k) == doctest::Approx(2.97).epsilon(1e-12));

    const FrameArray zeros = integrateGyroZ(Series::Zero(594));
    for (int k = 0; k < kFrameCount; ++k) CHECK(zeros(k) == 0.0);
}

TEST_CASE("sum of the 18 deltas telescopes to the full-window integral") {
    DeterministicRng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const Series omega = randomSeries(rng, 594, 80.0);
        const FrameArray deltas = integrateGyroZ(omega);
        double total = 0.0;
        for (Eigen::Index i = 0; i < omega.size(); ++i) total += omega(i) / 100.0;
        CHECK(std::abs(deltas.sum() - total) < 1e-9);
    }
}

TEST_CASE("block operations match the naive loops to 1e-12") {
    DeterministicRng rng(51);
    const SyncConfig cfg;
    for (int trial = 0; trial < 200; ++trial) {
        const Series accel = randomSeries(rng, 594, 15.0);
        const Series omega = randomSeries(rng, 594, 100.0);
        const FrameArray means = blockAverage(accel, cfg);
        const FrameArray deltas = integrateGyroZ(omega, cfg);
        for (int k = 0; k < kFrameCount; ++k) {
            CHECK(std::abs(means(k) - naiveBlockMean(accel, k, 33)) < 1e-12);
            CHECK(std::abs(deltas(k) - naiveBlockIntegral(omega, k, 33, 100.0)) < 1e-12);
        }
    }
}

TEST_CASE("speed interpolation: identity, midpoint, endpoint hold") {
    GpsTrace gps;
    gps.speed.resize(16);
    for (Eigen::Index i = 0; i < 16; ++i) gps.speed(i) = 2.0 * static_cast<double>(i);

    FrameArray times = FrameArray::Zero();
    times(0) = 4.0;   // exact sample time
    times(1) = 4.5;   // midpoint
    times(2) = -3.0;  // before first sample
    times(3) = 20.0;  // after last sample
    const FrameArray out = interpolateSpeed(gps, times);
    CHECK(out(0) == doctest::Approx(8.0));
    CHECK(out(1) == doctest::Approx(9.0));
    CHECK(out(2) == doctest::Approx(0.0));
    CHECK(out(3) == doctest::Approx(30.0));

    GpsTrace pair;
    pair.speed.resize(2);
    pair.speed << 10.0, 16.0;
    pair.start_time_s = 4.0;
    FrameArray query = FrameArray::Constant(4.5);
    CHECK(interpolateSpeed(pair, query)(0) == doctest::Approx(13.0));

    GpsTrace single;
    single.speed.resize(1);
    single.speed << 5.0;
    CHECK(thrownCode([&] { interpolateSpeed(single, query); }) == Errc::TooFewSamples);
}

TEST_CASE("synced sequence on a synthetic collision locates the spike block") {
    SynthProfile profile;
    profile.kind = SceClass::Collision;
    profile.event_time_s = 5.2;
    profile.spike_amplitude_mps2 = -11.3;
    profile.noise_sigma = 0.05;
    profile.seed = 7;
    const SynthResult synth = synthTrace(profile, 16.0);

    ClipManifest manifest;
    manifest.clip_id = "synthetic";
    manifest.duration_s = 16.0;
    manifest.fps = 30.0;
    manifest.frame_path_pattern = "frames/{idx}.jpg";

    const SyncedSequence seq = buildSyncedSequence(synth.imu, synth.gps, manifest);
    CHECK(seq.frames.size() == 18);
    CHECK(seq.window.t_event == doctest::Approx(5.20).epsilon(1e-9));
    CHECK(seq.window.t_start == doctest::Approx(1.20).epsilon(1e-9));

    int extreme_frame = 0;
    double extreme = 0.0;
    for (const SyncedFrame& frame : seq.frames) {
        if (std::abs(frame.accel(0)) > extreme) {
            extreme = std::abs(frame.accel(0));
            extreme_frame = frame.k;
        }
        CHECK(frame.t == doctest::Approx(seq.window.t_start + (frame.k - 1) / 3.0));
    }
    // The injected spike time falls inside the extreme frame's block.
    const double block_start = seq.frames[static_cast<std::size_t>(extreme_frame - 1)].t;
    CHECK(5.2 >= block_start - 1e-9);
    CHECK(5.2 < block_start + 0.34);
}

TEST_CASE("constant trace yields identical telemetry on every frame") {
    ImuTrace imu;
    imu.accel = SeriesX3::Zero(1600, 3);
    imu.accel.col(0).setConstant(1.5);
    imu.accel.col(2).setConstant(9.81);
    imu.gyro = SeriesX3::Zero(1600, 3);
    imu.gyro.col(2).setConstant(3.0);
    GpsTrace gps;
    gps.speed = Series::Constant(16, 12.0);

    ClipManifest manifest;
    manifest.clip_id = "constant";
    manifest.duration_s = 16.0;
    manifest.fps = 30.0;
    manifest.frame_path_pattern = "f/{idx}.jpg";

    const SyncedSequence seq = buildSyncedSequence(imu, gps, manifest);
    for (const SyncedFrame& frame : seq.frames) {
        CHECK(frame.accel(0) == doctest::Approx(1.5).epsilon(1e-12));
        CHECK(frame.accel(2) == doctest::Approx(9.81).epsilon(1e-12));
        CHECK(frame.delta_angle_deg == doctest::Approx(0.99).epsilon(1e-12));
        CHECK(frame.speed_mps == doctest::Approx(12.0));
    }
}

TEST_CASE("untimed sequences center the window and carry no telemetry") {
    ClipManifest manifest;
    manifest.clip_id = "nexar-like";
    manifest.duration_s = 6.0;
    manifest.fps = 30.0;
    manifest.frame_path_pattern = "f/{idx}.jpg";
    const SyncedSequence seq = buildUntimedSequence(manifest);
    CHECK_FALSE(seq.has_telemetry);
    CHECK(seq.window.t_start == doctest::Approx(0.0));
    CHECK(seq.window.t_end == doctest::Approx(6.0));
    for (const SyncedFrame& frame : seq.frames) CHECK(frame.accel(0) == 0.0);
}

TEST_SUITE_END();
