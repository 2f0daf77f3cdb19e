#include "scepipe/semantic.hpp"

#include "scepipe/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace scepipe {

namespace {

void validateDetection(const Detection& det) {
    if (!(det.x1 >= 0.0 && det.x1 < det.x2 && det.x2 <= 1.0) ||
        !(det.y1 >= 0.0 && det.y1 < det.y2 && det.y2 <= 1.0))
        throw Error(Errc::OutOfRangeBBox, "bbox (" + std::to_string(det.x1) + "," +
                                              std::to_string(det.y1) + "," + std::to_string(det.x2) +
                                              "," + std::to_string(det.y2) + ")");
    if (det.k < 1 || det.k > kFrameCount)
        throw Error(Errc::MalformedRecord, "detection frame ordinal " + std::to_string(det.k));
    if (det.class_label.empty() ||
        det.class_label.find_first_of(",;\t\n\r") != std::string::npos)
        throw Error(Errc::MalformedRecord, "bad class label \"" + det.class_label + "\"");
}

double parseNumber(std::string_view text) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw Error(Errc::MalformedRecord, "bad number \"" + std::string(text) + "\"");
    return value;
}

std::vector<std::string_view> splitView(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = text.find(sep, pos);
        parts.push_back(text.substr(pos, next == std::string_view::npos ? next : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return parts;
}

// detections value grammar: entries split by ';', fields by ',', in order
// k,class,x1,y1,x2,y2,track_id (track_id may be empty). Class labels are
// validated to exclude the separators, so no nested escaping is needed.
std::string encodeDetections(const std::vector<Detection>& detections) {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < detections.size(); ++i) {
        const Detection& det = detections[i];
        if (i > 0) out += ';';
        out += std::to_string(det.k);
        out += ',';
        out += det.class_label;
        for (double coord : {det.x1, det.y1, det.x2, det.y2}) {
            auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), coord);
            (void)ec;
            out += ',';
            out.append(buf, end);
        }
        out += ',';
        if (det.track_id) out += std::to_string(*det.track_id);
    }
    return out;
}

std::vector<Detection> decodeDetections(std::string_view encoded) {
    std::vector<Detection> detections;
    if (encoded.empty()) return detections;
    for (std::string_view entry : splitView(encoded, ';')) {
        std::vector<std::string_view> fields = splitView(entry, ',');
        if (fields.size() != 7)
            throw Error(Errc::MalformedRecord,
                        "detection entry needs 7 fields: \"" + std::string(entry) + "\"");
        Detection det;
        det.k = static_cast<int>(parseNumber(fields[0]));
        det.class_label = std::string(fields[1]);
        det.x1 = parseNumber(fields[2]);
        det.y1 = parseNumber(fields[3]);
        det.x2 = parseNumber(fields[4]);
        det.y2 = parseNumber(fields[5]);
        if (!fields[6].empty()) det.track_id = static_cast<long>(parseNumber(fields[6]));
        validateDetection(det);
        detections.push_back(std::move(det));
    }
    return detections;
}

std::optional<Maneuver> parseManeuver(const std::string& name) {
    if (name == "hard_brake") return Maneuver::HardBrake;
    if (name == "hard_turn") return Maneuver::HardTurn;
    if (name == "hard_acceleration") return Maneuver::HardAcceleration;
    if (name == "swerve") return Maneuver::Swerve;
    return std::nullopt; // arbitrary category strings are accepted as-is
}

std::string format2(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

} // namespace

const char* maneuverName(Maneuver maneuver) {
    switch (maneuver) {
        case Maneuver::HardBrake: return "hard_brake";
        case Maneuver::HardTurn: return "hard_turn";
        case Maneuver::HardAcceleration: return "hard_acceleration";
        case Maneuver::Swerve: return "swerve";
    }
    return "";
}

Record SemanticMetadata::toRecord(const std::string& clip_id) const {
    Record record;
    record.set("clip_id", clip_id);
    record.set("crash_detected", crash_detected);
    if (!maneuver_raw.empty()) record.set("maneuver", maneuver_raw);
    record.set("traffic_light_violation", traffic_light_violation);
    if (stop_sign_severity) record.set("stop_sign_severity", *stop_sign_severity);
    record.set("detections", encodeDetections(detections));
    return record;
}

SemanticMetadata SemanticMetadata::fromRecord(const Record& record) {
    SemanticMetadata meta;
    if (record.has("crash_detected")) meta.crash_detected = record.getBool("crash_detected");
    if (auto raw = record.find("maneuver"); raw && !raw->empty()) {
        meta.maneuver_raw = *raw;
        meta.maneuver = parseManeuver(*raw);
    }
    if (record.has("traffic_light_violation"))
        meta.traffic_light_violation = record.getBool("traffic_light_violation");
    if (record.has("stop_sign_severity")) {
        double severity = record.getDouble("stop_sign_severity");
        if (!(severity >= 0.0 && severity <= 1.0))
            throw Error(Errc::OutOfRangeSeverity, std::to_string(severity));
        meta.stop_sign_severity = severity;
    }
    if (auto encoded = record.find("detections")) meta.detections = decodeDetections(*encoded);
    return meta;
}

SemanticMetadata loadSemanticMetadata(const std::string& path) {
    std::vector<Record> records = readRecordsFile(path);
    if (records.empty()) return SemanticMetadata{};
    if (records.size() != 1)
        throw Error(Errc::MalformedRecord,
                    path + ": expected one record, got " + std::to_string(records.size()));
    return SemanticMetadata::fromRecord(records.front());
}

void writeSemanticMetadata(const std::string& path, const std::string& clip_id,
                           const SemanticMetadata& meta) {
    writeRecordsFile(path, {meta.toRecord(clip_id)});
}

SceClass heuristicSceClassifier(const Eigen::Ref<const Series>& accel_x,
                                const SceThresholds& thresholds) {
    if (accel_x.size() == 0) throw Error(Errc::EmptySeries, "classifier on empty window");
    const double peak = accel_x.abs().maxCoeff();
    if (peak >= thresholds.collision_mps2) return SceClass::Collision;
    if (peak >= thresholds.near_mps2) return SceClass::NearCollision;
    return SceClass::Normal;
}

MetadataSummary summarizeMetadata(const SemanticMetadata& meta,
                                  const std::array<SyncedFrame, kFrameCount>& frames) {
    MetadataSummary summary;

    if (!meta.hasAnyFlag()) {
        summary.header = "no expert flags";
    } else {
        std::ostringstream header;
        header << "expert flags:";
        if (meta.crash_detected) header << " crash=yes";
        if (!meta.maneuver_raw.empty()) header << " maneuver=" << meta.maneuver_raw;
        if (meta.traffic_light_violation) header << " traffic_light_violation=yes";
        if (meta.stop_sign_severity)
            header << " stop_sign_severity=" << format2(*meta.stop_sign_severity);
        summary.header = header.str();
    }

    // Canonical ordering: class ascending, then track_id (untracked last),
    // then coordinates, so any input permutation summarizes identically.
    std::vector<Detection> sorted = meta.detections;
    std::stable_sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
        if (a.class_label != b.class_label) return a.class_label < b.class_label;
        if (a.track_id.has_value() != b.track_id.has_value()) return a.track_id.has_value();
        if (a.track_id != b.track_id) return a.track_id < b.track_id;
        return std::tie(a.x1, a.y1, a.x2, a.y2) < std::tie(b.x1, b.y1, b.x2, b.y2);
    });

    for (const SyncedFrame& frame : frames) {
        std::ostringstream line;
        line << "frame " << frame.k << ": ";
        bool any = false;
        std::string current_class;
        std::vector<const Detection*> group;
        auto flush = [&] {
            if (group.empty()) return;
            if (any) line << ", ";
            line << current_class << " x" << group.size();
            for (const Detection* det : group)
                line << " (" << format2(det->cx()) << "," << format2(det->cy()) << ")";
            any = true;
            group.clear();
        };
        for (const Detection& det : sorted) {
            if (det.k != frame.k) continue;
            if (det.class_label != current_class) {
                flush();
                current_class = det.class_label;
            }
            group.push_back(&det);
        }
        flush();
        if (!any) line << "no detections";
        summary.frame_lines[static_cast<std::size_t>(frame.k - 1)] = line.str();
    }
    return summary;
}

} // namespace scepipe
