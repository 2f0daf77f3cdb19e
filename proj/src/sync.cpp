#include "scepipe/sync.hpp"

#include "scepipe/error.hpp"

#include <algorithm>
#include <cmath>

namespace scepipe {

double detectEventTimestamp(const Eigen::Ref<const Series>& accel_x, double sample_rate_hz,
                            double start_time_s) {
    if (accel_x.size() == 0) throw Error(Errc::EmptySeries, "event detection on empty series");
    Eigen::Index best = 0;
    // abs().maxCoeff(&best) would also work, but Eigen leaves argmax ties
    // unspecified; the contract is earliest-index, so scan explicitly.
    double best_value = std::abs(accel_x(0));
    for (Eigen::Index i = 1; i < accel_x.size(); ++i) {
        double v = std::abs(accel_x(i));
        if (v > best_value) {
            best_value = v;
            best = i;
        }
    }
    return start_time_s + static_cast<double>(best) / sample_rate_hz;
}

EventWindow clampEventWindow(double t_event, double clip_duration_s) {
    if (clip_duration_s < kWindowSeconds)
        throw Error(Errc::ClipTooShort, "clip duration " + std::to_string(clip_duration_s) +
                                            " s is shorter than the " +
                                            std::to_string(kWindowSeconds) + " s window");
    EventWindow window;
    window.t_event = t_event;
    window.t_start = std::clamp(t_event - kWindowPreSeconds, 0.0, clip_duration_s - kWindowSeconds);
    window.t_end = window.t_start + kWindowSeconds;
    return window;
}

FrameIndices selectFrameIndices(const EventWindow& window, double raw_fps, long total_frames) {
    FrameIndices indices{};
    const long last = std::max(0L, total_frames - 1);
    for (int k = 1; k <= kFrameCount; ++k) {
        double t_k = window.t_start + static_cast<double>(k - 1) / kTargetFps;
        long idx = std::llround(t_k * raw_fps);
        indices[static_cast<std::size_t>(k - 1)] = std::clamp(idx, 0L, last);
    }
    return indices;
}

namespace {

void requireWindow(Eigen::Index actual, const SyncConfig& cfg) {
    const Eigen::Index required = cfg.windowSamples();
    if (actual < required)
        throw Error(Errc::WindowTooShort, "got " + std::to_string(actual) + " samples, need " +
                                              std::to_string(required));
}

} // namespace

FrameArray blockAverage(const Eigen::Ref<const Series>& window_samples, const SyncConfig& cfg) {
    requireWindow(window_samples.size(), cfg);
    const int w = cfg.blockSize();
    FrameArray out;
    for (int k = 0; k < kFrameCount; ++k) out(k) = window_samples.segment(k * w, w).mean();
    return out;
}

FrameArray3 blockAverageAccel(const Eigen::Ref<const SeriesX3>& window_samples,
                              const SyncConfig& cfg) {
    requireWindow(window_samples.rows(), cfg);
    const int w = cfg.blockSize();
    FrameArray3 out;
    for (int k = 0; k < kFrameCount; ++k)
        out.row(k) = window_samples.middleRows(k * w, w).colwise().mean();
    return out;
}

FrameArray integrateGyroZ(const Eigen::Ref<const Series>& window_omega_z, const SyncConfig& cfg) {
    requireWindow(window_omega_z.size(), cfg);
    const int w = cfg.blockSize();
    FrameArray out;
    for (int k = 0; k < kFrameCount; ++k)
        out(k) = window_omega_z.segment(k * w, w).sum() / cfg.sensor_rate_hz;
    return out;
}

FrameArray interpolateSpeed(const GpsTrace& gps, const FrameArray& frame_times) {
    if (gps.sampleCount() < 2)
        throw Error(Errc::TooFewSamples, "speed interpolation needs at least 2 GPS samples");
    const Eigen::Index n = gps.sampleCount();
    const double t0 = gps.start_time_s;
    const double dt = 1.0 / gps.sample_rate_hz;
    FrameArray out;
    for (int k = 0; k < kFrameCount; ++k) {
        double t = frame_times(k);
        if (t <= t0) {
            out(k) = gps.speed(0);
            continue;
        }
        double last_t = gps.timeAt(n - 1);
        if (t >= last_t) {
            out(k) = gps.speed(n - 1);
            continue;
        }
        auto i = static_cast<Eigen::Index>((t - t0) / dt);
        i = std::clamp<Eigen::Index>(i, 0, n - 2);
        double t_i = gps.timeAt(i);
        double frac = (t - t_i) / dt;
        out(k) = gps.speed(i) + frac * (gps.speed(i + 1) - gps.speed(i));
    }
    return out;
}

SyncedSequence buildSyncedSequence(const ImuTrace& imu, const GpsTrace& gps,
                                   const ClipManifest& manifest, const SyncConfig& cfg) {
    SyncedSequence seq;
    seq.clip_id = manifest.clip_id;
    seq.has_telemetry = true;

    const double t_event =
        detectEventTimestamp(imu.accel.col(0), imu.sample_rate_hz, imu.start_time_s);
    seq.window = clampEventWindow(t_event, manifest.duration_s);
    const FrameIndices raw_indices =
        selectFrameIndices(seq.window, manifest.fps, manifest.totalFrames());

    // Sample n=1 of the block equations is the first sample at t_start.
    const Eigen::Index start_index =
        std::llround((seq.window.t_start - imu.start_time_s) * imu.sample_rate_hz);
    const Eigen::Index needed = cfg.windowSamples();
    if (start_index < 0 || start_index + needed > imu.sampleCount())
        throw Error(Errc::WindowTooShort,
                    "IMU trace does not cover the event window: need samples [" +
                        std::to_string(start_index) + ", " + std::to_string(start_index + needed) +
                        "), have " + std::to_string(imu.sampleCount()));

    const FrameArray3 accel_sync = blockAverageAccel(imu.accel.middleRows(start_index, needed), cfg);
    const FrameArray delta_angle =
        integrateGyroZ(imu.gyro.col(2).segment(start_index, needed), cfg);

    FrameArray frame_times;
    for (int k = 0; k < kFrameCount; ++k)
        frame_times(k) = seq.window.t_start + static_cast<double>(k) / cfg.target_fps;
    const FrameArray speeds = interpolateSpeed(gps, frame_times);

    for (int k = 0; k < kFrameCount; ++k) {
        SyncedFrame& frame = seq.frames[static_cast<std::size_t>(k)];
        frame.k = k + 1;
        frame.t = frame_times(k);
        frame.raw_frame_index = raw_indices[static_cast<std::size_t>(k)];
        frame.accel = accel_sync.row(k);
        frame.delta_angle_deg = delta_angle(k);
        frame.speed_mps = speeds(k);
    }
    return seq;
}

SyncedSequence buildUntimedSequence(const ClipManifest& manifest) {
    SyncedSequence seq;
    seq.clip_id = manifest.clip_id;
    seq.has_telemetry = false;
    seq.window = clampEventWindow(manifest.duration_s / 2.0, manifest.duration_s);
    const FrameIndices raw_indices =
        selectFrameIndices(seq.window, manifest.fps, manifest.totalFrames());
    for (int k = 0; k < kFrameCount; ++k) {
        SyncedFrame& frame = seq.frames[static_cast<std::size_t>(k)];
        frame.k = k + 1;
        frame.t = seq.window.t_start + static_cast<double>(k) / kTargetFps;
        frame.raw_frame_index = raw_indices[static_cast<std::size_t>(k)];
    }
    return seq;
}

} // namespace scepipe
