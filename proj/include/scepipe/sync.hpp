#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>

#include "scepipe/telemetry.hpp"

namespace scepipe {

constexpr int kFrameCount = 18;
constexpr int kTargetFps = 3;
constexpr double kWindowPreSeconds = 4.0;
constexpr double kWindowPostSeconds = 2.0;
constexpr double kWindowSeconds = kWindowPreSeconds + kWindowPostSeconds;

/// Fixed-size per-frame vectors keep the 18-frame contract in the type.
using FrameArray = Eigen::Array<double, kFrameCount, 1>;
using FrameArray3 = Eigen::Array<double, kFrameCount, 3>;
using FrameIndices = std::array<long, kFrameCount>;

/// Sensor-to-frame alignment parameters. W is the number of raw samples
/// averaged into one frame: floor(f_s / target_fps), 33 at the defaults.
struct SyncConfig {
    double sensor_rate_hz = kImuRateHz;
    int target_fps = kTargetFps;

    int blockSize() const { return static_cast<int>(sensor_rate_hz) / target_fps; }
    int windowSamples() const { return kFrameCount * blockSize(); }
};

/// 6-second event window [t_start, t_start + 6], nominally [t_e - 4, t_e + 2],
/// slid minimally to fit inside the clip.
struct EventWindow {
    double t_event = 0.0;
    double t_start = 0.0;
    double t_end = 0.0;

    double width() const { return t_end - t_start; }
};

/// One aligned frame: ordinal k in 1..18, block-start timestamp, raw frame
/// index, block-averaged accel, integrated z-rotation (deg), interpolated
/// speed (m/s).
struct SyncedFrame {
    int k = 0;
    double t = 0.0;
    long raw_frame_index = 0;
    Eigen::Array3d accel = Eigen::Array3d::Zero();
    double delta_angle_deg = 0.0;
    double speed_mps = 0.0;
};

/// Full per-clip sync result. has_telemetry is false for clips without an
/// IMU stream (window centered on the clip, telemetry fields zero).
struct SyncedSequence {
    std::string clip_id;
    EventWindow window;
    std::array<SyncedFrame, kFrameCount> frames;
    bool has_telemetry = true;
};

/// Timestamp of the max-|value| sample: index / rate + start_time.
/// Ties break to the earliest sample. Throws Errc::EmptySeries.
double detectEventTimestamp(const Eigen::Ref<const Series>& accel_x,
                            double sample_rate_hz = kImuRateHz, double start_time_s = 0.0);

/// Nominal [t_e - 4, t_e + 2]; slid to fit [0, clip_duration], width exactly
/// 6 s. Throws Errc::ClipTooShort when the clip is under 6 s.
EventWindow clampEventWindow(double t_event, double clip_duration_s);

/// index_k = round((t_start + (k-1)/3) * raw_fps), clamped to valid frames.
/// Non-decreasing, always 18 entries.
FrameIndices selectFrameIndices(const EventWindow& window, double raw_fps, long total_frames);

/// Per-frame block mean over W consecutive samples; samples beyond 18*W are
/// discarded. Requires window_samples.rows() >= 18*W (Errc::WindowTooShort).
FrameArray3 blockAverageAccel(const Eigen::Ref<const SeriesX3>& window_samples,
                              const SyncConfig& cfg = {});
FrameArray blockAverage(const Eigen::Ref<const Series>& window_samples,
                        const SyncConfig& cfg = {});

/// Per-frame rectangular integral of the z rotation rate: sum(w_z) / f_s,
/// degrees. Same length requirement as blockAverage.
FrameArray integrateGyroZ(const Eigen::Ref<const Series>& window_omega_z,
                          const SyncConfig& cfg = {});

/// Piecewise-linear speed at each query time; queries outside the sampled
/// range hold the nearest endpoint. Throws Errc::TooFewSamples.
FrameArray interpolateSpeed(const GpsTrace& gps, const FrameArray& frame_times);

/// Composition of the five steps above: event detection, window clamping,
/// frame selection, block averaging, gyro integration, speed interpolation.
SyncedSequence buildSyncedSequence(const ImuTrace& imu, const GpsTrace& gps,
                                   const ClipManifest& manifest, const SyncConfig& cfg = {});

/// Windowing + frame selection for clips with no IMU stream: the window is
/// centered on the clip and telemetry fields stay zero.
SyncedSequence buildUntimedSequence(const ClipManifest& manifest);

} // namespace scepipe
