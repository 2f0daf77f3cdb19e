#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scepipe/sync.hpp"
#include "scepipe/telemetry.hpp"

namespace scepipe {

/// One tracked object box on frame k, coordinates normalized to [0,1]
/// regardless of source resolution.
struct Detection {
    int k = 1; // frame ordinal, 1..18
    std::string class_label;
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
    std::optional<long> track_id;

    double cx() const { return (x1 + x2) / 2.0; }
    double cy() const { return (y1 + y2) / 2.0; }
};

enum class Maneuver { HardBrake, HardTurn, HardAcceleration, Swerve };

const char* maneuverName(Maneuver maneuver);

/// Aggregate expert-model output for one clip. The expert models themselves
/// are external producers; this is their file contract. maneuver_raw keeps
/// whatever category string the file carried, maneuver is the parsed enum
/// when it matches a known category.
struct SemanticMetadata {
    bool crash_detected = false;
    std::optional<Maneuver> maneuver;
    std::string maneuver_raw;
    bool traffic_light_violation = false;
    std::optional<double> stop_sign_severity; // [0,1]
    std::vector<Detection> detections;

    bool hasAnyFlag() const {
        return crash_detected || !maneuver_raw.empty() || traffic_light_violation ||
               stop_sign_severity.has_value();
    }

    Record toRecord(const std::string& clip_id) const;
    static SemanticMetadata fromRecord(const Record& record);
};

/// File holds a single record for the clip. Validates bbox ordering/range,
/// severity range and frame ordinals; missing optional fields default empty.
SemanticMetadata loadSemanticMetadata(const std::string& path);
void writeSemanticMetadata(const std::string& path, const std::string& clip_id,
                           const SemanticMetadata& meta);

/// Thresholds for the rule-based SCE stand-in. Defaults put the known
/// collision signature (11.3 m/s^2) above theta_collision and ordinary hard
/// braking below it.
struct SceThresholds {
    double collision_mps2 = 10.0;
    double near_mps2 = 4.0;
};

/// Collision if max|a_x| >= theta_c, NearCollision if >= theta_n, else
/// Normal. Throws Errc::EmptySeries.
SceClass heuristicSceClassifier(const Eigen::Ref<const Series>& accel_x,
                                const SceThresholds& thresholds = {});

/// Header line (global expert flags) plus one line per frame: per-class
/// object counts with centroids to 2 decimals, classes ascending, tracks in
/// a fixed total order, so the text is permutation-invariant in the input.
struct MetadataSummary {
    std::string header;
    std::array<std::string, kFrameCount> frame_lines;
};

MetadataSummary summarizeMetadata(const SemanticMetadata& meta,
                                  const std::array<SyncedFrame, kFrameCount>& frames);

} // namespace scepipe
