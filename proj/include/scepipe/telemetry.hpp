#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scepipe/records.hpp"

namespace scepipe {

/// Sampled series are Eigen arrays so the sync math stays expression-based;
/// Eigen is the only math dependency in the numeric core.
using Series = Eigen::ArrayXd;
using SeriesX3 = Eigen::ArrayX3d; // columns x, y, z

constexpr double kImuRateHz = 100.0;
constexpr double kGpsRateHz = 1.0;

/// Triaxial accelerometer + gyroscope stream at 100 Hz.
/// accel in m/s^2, gyro in deg/s, both N x 3 with equal N >= 1, all finite.
/// Gravity is not removed; the event heuristic runs on raw readings.
struct ImuTrace {
    SeriesX3 accel;
    SeriesX3 gyro;
    double sample_rate_hz = kImuRateHz;
    double start_time_s = 0.0;

    Eigen::Index sampleCount() const { return accel.rows(); }
    double timeAt(Eigen::Index i) const {
        return start_time_s + static_cast<double>(i) / sample_rate_hz;
    }
};

/// GPS speed stream at 1 Hz, m/s, non-negative, length >= 2.
struct GpsTrace {
    Series speed;
    double sample_rate_hz = kGpsRateHz;
    double start_time_s = 0.0;

    Eigen::Index sampleCount() const { return speed.size(); }
    double timeAt(Eigen::Index i) const {
        return start_time_s + static_cast<double>(i) / sample_rate_hz;
    }
};

enum class Source { Private, Bddx, Nexar };

const char* sourceName(Source source);
Source parseSource(const std::string& name); // throws Errc::InvalidValue

/// Per-clip entry of the input manifest. The pipeline never opens video
/// files; frame_path_pattern carries an {idx} placeholder an external
/// extractor resolves.
struct ClipManifest {
    std::string clip_id;
    double duration_s = 16.0;
    double fps = 30.0;
    int width = 1280;
    int height = 720;
    std::string frame_path_pattern;
    Source source = Source::Private;
    std::optional<std::string> imu_path;
    std::optional<std::string> gps_path;
    std::optional<std::string> semantic_path;

    long totalFrames() const;
    std::string framePath(long index) const;

    Record toRecord() const;
    static ClipManifest fromRecord(const Record& record);
};

std::vector<ClipManifest> loadClipManifests(const std::string& path);
void writeClipManifests(const std::string& path, const std::vector<ClipManifest>& clips);

/// Safety-critical-event severity. Unknown only ever appears on the
/// prediction side of evaluation; it is not a trainable label.
enum class SceClass { Normal, NearCollision, Collision, Unknown };

/// Canonical label token: "normal", "near-collision", "collision".
const char* sceToken(SceClass label);
SceClass parseSceToken(const std::string& token); // throws Errc::UnknownSceLabel

// CSV loaders. Layouts in docs/formats.md; an optional "# units: ..." header
// line converts g -> m/s^2 and km/h -> m/s at load so downstream code sees
// one unit system.
ImuTrace loadImuTrace(const std::string& path);
GpsTrace loadGpsTrace(const std::string& path);

void writeImuTrace(const std::string& path, const ImuTrace& trace);
void writeGpsTrace(const std::string& path, const GpsTrace& trace);

constexpr double kStandardGravity = 9.80665; // m/s^2 per g
constexpr double kKmhToMps = 1.0 / 3.6;

} // namespace scepipe
