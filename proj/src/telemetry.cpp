#include "scepipe/telemetry.hpp"

#include "scepipe/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace scepipe {

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows; // numeric cells, row-major
};

std::vector<std::string> splitCsvLine(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream stream(line);
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parseCell(const std::string& cell, const std::string& path, std::size_t lineno) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    while (ptr < last && (*ptr == ' ' || *ptr == '\t' || *ptr == '\r')) ++ptr;
    if (ec != std::errc{} || ptr != last)
        throw Error(Errc::MalformedRow,
                    path + ":" + std::to_string(lineno) + ": bad numeric cell \"" + cell + "\"");
    return value;
}

CsvTable readCsv(const std::string& path, std::size_t expected_columns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::MissingFile, path);
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = splitCsvLine(line);
        if (table.header.empty()) {
            table.header = cells;
            if (table.header.size() != expected_columns)
                throw Error(Errc::MalformedRow,
                            path + ":" + std::to_string(lineno) + ": expected " +
                                std::to_string(expected_columns) + " columns, got " +
                                std::to_string(cells.size()));
            continue;
        }
        if (cells.size() != expected_columns)
            throw Error(Errc::MalformedRow,
                        path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(expected_columns) + " columns, got " +
                            std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            row[c] = parseCell(cells[c], path, lineno);
            if (!std::isfinite(row[c]))
                throw Error(Errc::NonFiniteSample,
                            path + ":" + std::to_string(lineno) + ": non-finite value in column " +
                                table.header[c]);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

// Median time step of the t column must stay within 1% of the nominal rate.
void checkRate(const CsvTable& table, double nominal_dt, const std::string& path) {
    if (table.rows.size() < 2) return;
    std::vector<double> deltas;
    deltas.reserve(table.rows.size() - 1);
    for (std::size_t i = 1; i < table.rows.size(); ++i)
        deltas.push_back(table.rows[i][0] - table.rows[i - 1][0]);
    std::nth_element(deltas.begin(), deltas.begin() + deltas.size() / 2, deltas.end());
    double median = deltas[deltas.size() / 2];
    if (std::abs(median - nominal_dt) > 0.01 * nominal_dt)
        throw Error(Errc::RateMismatch, path + ": median dt " + std::to_string(median) +
                                            " s, expected " + std::to_string(nominal_dt) + " s");
}

std::string formatDoubleExact(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, end);
}

} // namespace

const char* sourceName(Source source) {
    switch (source) {
        case Source::Private: return "private";
        case Source::Bddx: return "bddx";
        case Source::Nexar: return "nexar";
    }
    return "private";
}

Source parseSource(const std::string& name) {
    if (name == "private") return Source::Private;
    if (name == "bddx") return Source::Bddx;
    if (name == "nexar") return Source::Nexar;
    throw Error(Errc::InvalidValue, "unknown source \"" + name + "\"");
}

const char* sceToken(SceClass label) {
    switch (label) {
        case SceClass::Normal: return "normal";
        case SceClass::NearCollision: return "near-collision";
        case SceClass::Collision: return "collision";
        case SceClass::Unknown: return "unknown";
    }
    return "unknown";
}

SceClass parseSceToken(const std::string& token) {
    if (token == "normal") return SceClass::Normal;
    if (token == "near-collision") return SceClass::NearCollision;
    if (token == "collision") return SceClass::Collision;
    throw Error(Errc::UnknownSceLabel, "\"" + token + "\"");
}

long ClipManifest::totalFrames() const {
    return std::max(1L, static_cast<long>(std::llround(duration_s * fps)));
}

std::string ClipManifest::framePath(long index) const {
    std::string path = frame_path_pattern;
    std::size_t pos = path.find("{idx}");
    if (pos != std::string::npos) path.replace(pos, 5, std::to_string(index));
    return path;
}

Record ClipManifest::toRecord() const {
    Record record;
    record.set("clip_id", clip_id);
    record.set("duration_s", duration_s);
    record.set("fps", fps);
    record.set("width", static_cast<std::int64_t>(width));
    record.set("height", static_cast<std::int64_t>(height));
    record.set("frame_path_pattern", frame_path_pattern);
    record.set("source", sourceName(source));
    if (imu_path) record.set("imu_path", *imu_path);
    if (gps_path) record.set("gps_path", *gps_path);
    if (semantic_path) record.set("semantic_path", *semantic_path);
    return record;
}

ClipManifest ClipManifest::fromRecord(const Record& record) {
    ClipManifest clip;
    clip.clip_id = record.get("clip_id");
    clip.duration_s = record.getDouble("duration_s");
    clip.fps = record.getDouble("fps");
    clip.width = static_cast<int>(record.getInt("width"));
    clip.height = static_cast<int>(record.getInt("height"));
    clip.frame_path_pattern = record.get("frame_path_pattern");
    clip.source = parseSource(record.get("source"));
    clip.imu_path = record.find("imu_path");
    clip.gps_path = record.find("gps_path");
    clip.semantic_path = record.find("semantic_path");
    if (clip.clip_id.empty()) throw Error(Errc::MalformedRecord, "empty clip_id");
    if (!(clip.duration_s > 0.0))
        throw Error(Errc::InvalidValue, clip.clip_id + ": duration_s must be > 0");
    if (!(clip.fps > 0.0)) throw Error(Errc::InvalidValue, clip.clip_id + ": fps must be > 0");
    return clip;
}

std::vector<ClipManifest> loadClipManifests(const std::string& path) {
    std::vector<ClipManifest> clips;
    std::set<std::string> seen;
    for (const Record& record : readRecordsFile(path)) {
        ClipManifest clip = ClipManifest::fromRecord(record);
        if (!seen.insert(clip.clip_id).second)
            throw Error(Errc::InvalidValue, "duplicate clip_id \"" + clip.clip_id + "\" in " + path);
        clips.push_back(std::move(clip));
    }
    return clips;
}

void writeClipManifests(const std::string& path, const std::vector<ClipManifest>& clips) {
    std::vector<Record> records;
    records.reserve(clips.size());
    for (const ClipManifest& clip : clips) records.push_back(clip.toRecord());
    writeRecordsFile(path, records);
}

ImuTrace loadImuTrace(const std::string& path) {
    CsvTable table = readCsv(path, 7);

    // Column names double as the per-file unit declaration.
    double accel_scale = 1.0;
    if (table.header[1] == "ax_g" && table.header[2] == "ay_g" && table.header[3] == "az_g") {
        accel_scale = kStandardGravity;
    } else if (!(table.header[1] == "ax_mps2" && table.header[2] == "ay_mps2" &&
                 table.header[3] == "az_mps2")) {
        throw Error(Errc::MalformedRow, path + ": unrecognized accel columns (want *_mps2 or *_g)");
    }
    if (!(table.header[0] == "t_s" && table.header[4] == "gx_dps" && table.header[5] == "gy_dps" &&
          table.header[6] == "gz_dps"))
        throw Error(Errc::MalformedRow, path + ": header must be t_s,ax_*,ay_*,az_*,gx_dps,gy_dps,gz_dps");

    if (table.rows.empty()) throw Error(Errc::TooFewSamples, path + ": no samples");
    checkRate(table, 1.0 / kImuRateHz, path);

    ImuTrace trace;
    const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
    trace.accel.resize(n, 3);
    trace.gyro.resize(n, 3);
    trace.start_time_s = table.rows.front()[0];
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::vector<double>& row = table.rows[static_cast<std::size_t>(i)];
        trace.accel(i, 0) = row[1] * accel_scale;
        trace.accel(i, 1) = row[2] * accel_scale;
        trace.accel(i, 2) = row[3] * accel_scale;
        trace.gyro(i, 0) = row[4];
        trace.gyro(i, 1) = row[5];
        trace.gyro(i, 2) = row[6];
    }
    return trace;
}

GpsTrace loadGpsTrace(const std::string& path) {
    CsvTable table = readCsv(path, 2);

    double speed_scale = 1.0;
    if (table.header[1] == "speed_kmh") {
        speed_scale = kKmhToMps;
    } else if (table.header[1] != "speed_mps") {
        throw Error(Errc::MalformedRow, path + ": speed column must be speed_mps or speed_kmh");
    }
    if (table.header[0] != "t_s")
        throw Error(Errc::MalformedRow, path + ": first column must be t_s");

    if (table.rows.size() < 2)
        throw Error(Errc::TooFewSamples,
                    path + ": need at least 2 samples, got " + std::to_string(table.rows.size()));
    checkRate(table, 1.0 / kGpsRateHz, path);

    GpsTrace trace;
    const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
    trace.speed.resize(n);
    trace.start_time_s = table.rows.front()[0];
    for (Eigen::Index i = 0; i < n; ++i) {
        double value = table.rows[static_cast<std::size_t>(i)][1] * speed_scale;
        if (value < 0.0)
            throw Error(Errc::InvalidValue,
                        path + ": negative speed " + std::to_string(value) + " at sample " +
                            std::to_string(i));
        trace.speed(i) = value;
    }
    return trace;
}

void writeImuTrace(const std::string& path, const ImuTrace& trace) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path + " for writing");
    out << "t_s,ax_mps2,ay_mps2,az_mps2,gx_dps,gy_dps,gz_dps\n";
    for (Eigen::Index i = 0; i < trace.sampleCount(); ++i) {
        out << formatDoubleExact(trace.timeAt(i));
        for (int c = 0; c < 3; ++c) out << ',' << formatDoubleExact(trace.accel(i, c));
        for (int c = 0; c < 3; ++c) out << ',' << formatDoubleExact(trace.gyro(i, c));
        out << '\n';
    }
    if (!out) throw Error(Errc::IoError, "write failed for " + path);
}

void writeGpsTrace(const std::string& path, const GpsTrace& trace) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path + " for writing");
    out << "t_s,speed_mps\n";
    for (Eigen::Index i = 0; i < trace.sampleCount(); ++i)
        out << formatDoubleExact(trace.timeAt(i)) << ',' << formatDoubleExact(trace.speed(i))
            << '\n';
    if (!out) throw Error(Errc::IoError, "write failed for " + path);
}

} // namespace scepipe
