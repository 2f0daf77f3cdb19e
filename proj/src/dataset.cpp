#include "scepipe/dataset.hpp"

#include "scepipe/error.hpp"
#include "scepipe/hash.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace scepipe {

const char* splitName(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split parseSplit(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw Error(Errc::MalformedRecord, "unknown split \"" + name + "\"");
}

const char* taskName(Task task) {
    switch (task) {
        case Task::Caption: return "caption";
        case Task::OpenQa: return "open_qa";
        case Task::ClosedQa: return "closed_qa";
        case Task::SceCls: return "sce_cls";
    }
    return "caption";
}

Task parseTask(const std::string& name) {
    if (name == "caption") return Task::Caption;
    if (name == "open_qa") return Task::OpenQa;
    if (name == "closed_qa") return Task::ClosedQa;
    if (name == "sce_cls") return Task::SceCls;
    throw Error(Errc::MalformedRecord, "unknown task \"" + name + "\"");
}

namespace {

std::string exactDouble(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, end);
}

double parseDoubleStrict(std::string_view text) {
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

// frame_indices: comma-separated ints. telemetry: 18 '|'-separated groups of
// ax:ay:az:dalpha:v. Numbers only, so the record escaping layer suffices.
std::string encodeFrameIndices(const FrameIndices& indices) {
    std::string out;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (i > 0) out += ',';
        out += std::to_string(indices[i]);
    }
    return out;
}

FrameIndices decodeFrameIndices(std::string_view encoded) {
    std::vector<std::string_view> parts = splitView(encoded, ',');
    if (parts.size() != kFrameCount)
        throw Error(Errc::MalformedRecord,
                    "frame_indices needs 18 entries, got " + std::to_string(parts.size()));
    FrameIndices indices{};
    for (std::size_t i = 0; i < parts.size(); ++i)
        indices[i] = static_cast<long>(parseDoubleStrict(parts[i]));
    return indices;
}

std::string encodeTelemetry(const std::array<FrameTelemetry, kFrameCount>& telemetry) {
    std::string out;
    for (std::size_t i = 0; i < telemetry.size(); ++i) {
        if (i > 0) out += '|';
        const FrameTelemetry& t = telemetry[i];
        out += exactDouble(t.ax) + ":" + exactDouble(t.ay) + ":" + exactDouble(t.az) + ":" +
               exactDouble(t.dalpha) + ":" + exactDouble(t.v);
    }
    return out;
}

std::array<FrameTelemetry, kFrameCount> decodeTelemetry(std::string_view encoded) {
    std::vector<std::string_view> groups = splitView(encoded, '|');
    if (groups.size() != kFrameCount)
        throw Error(Errc::MalformedRecord,
                    "telemetry needs 18 groups, got " + std::to_string(groups.size()));
    std::array<FrameTelemetry, kFrameCount> telemetry{};
    for (std::size_t i = 0; i < groups.size(); ++i) {
        std::vector<std::string_view> fields = splitView(groups[i], ':');
        if (fields.size() != 5)
            throw Error(Errc::MalformedRecord, "telemetry group needs 5 fields");
        telemetry[i] = FrameTelemetry{parseDoubleStrict(fields[0]), parseDoubleStrict(fields[1]),
                                      parseDoubleStrict(fields[2]), parseDoubleStrict(fields[3]),
                                      parseDoubleStrict(fields[4])};
    }
    return telemetry;
}

} // namespace

Record TrainingExample::toRecord() const {
    Record record;
    record.set("example_id", example_id);
    record.set("clip_id", clip_id);
    record.set("source", sourceName(source));
    record.set("split", splitName(split));
    record.set("task", taskName(task));
    record.set("frame_indices", encodeFrameIndices(frame_indices));
    if (telemetry) record.set("telemetry", encodeTelemetry(*telemetry));
    record.set("prompt_text", prompt_text);
    record.set("target_text", target_text);
    record.set("sce_label", sceToken(sce_label));
    record.set("template_version", template_version);
    return record;
}

TrainingExample TrainingExample::fromRecord(const Record& record) {
    TrainingExample example;
    example.example_id = record.get("example_id");
    example.clip_id = record.get("clip_id");
    example.source = parseSource(record.get("source"));
    example.split = parseSplit(record.get("split"));
    example.task = parseTask(record.get("task"));
    example.frame_indices = decodeFrameIndices(record.get("frame_indices"));
    if (auto encoded = record.find("telemetry")) example.telemetry = decodeTelemetry(*encoded);
    example.prompt_text = record.get("prompt_text");
    example.target_text = record.get("target_text");
    example.sce_label = parseSceToken(record.get("sce_label"));
    example.template_version = record.get("template_version");
    return example;
}

Record TrainingManifest::toRecord() const {
    Record record;
    record.set("adapter_method", adapter_method);
    record.set("rank", static_cast<std::int64_t>(rank));
    record.set("alpha", static_cast<std::int64_t>(alpha));
    record.set("learning_rate", learning_rate);
    record.set("batch_size", static_cast<std::int64_t>(batch_size));
    record.set("image_width", static_cast<std::int64_t>(image_width));
    record.set("image_height", static_cast<std::int64_t>(image_height));
    record.set("clip_seconds", clip_seconds);
    record.set("fps", static_cast<std::int64_t>(fps));
    record.set("neftune_noise", static_cast<std::int64_t>(neftune_noise));
    record.set("frozen", frozen);
    record.set("student_model_id", student_model_id);
    return record;
}

bool imuDropoutDecision(std::uint64_t run_seed, const std::string& clip_id) {
    return hash64(run_seed, clip_id) < (1ULL << 63);
}

Split assignSplit(const std::string& clip_id, Source /*source*/, const SplitRatios& ratios) {
    if (!(ratios.train >= 0.0 && ratios.val >= 0.0 && ratios.test >= 0.0) ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
        throw Error(Errc::BadRatios, "ratios must be non-negative and sum to 1");
    const double u = toUnitInterval(hash64(clip_id));
    if (u < ratios.train) return Split::Train;
    if (u < ratios.train + ratios.val) return Split::Val;
    return Split::Test;
}

std::vector<TrainingExample> buildExamples(const TeacherAnnotation& annotation,
                                           const SyncedSequence& sequence, Source source,
                                           bool drop_imu, const PromptTemplates& templates) {
    const bool include_imu = !drop_imu && sequence.has_telemetry && source != Source::Nexar;
    const std::string student_prompt = flattenSegments(renderStudentPrompt(
        templates, std::span<const SyncedFrame>(sequence.frames), include_imu,
        sequence.window.t_event));

    TrainingExample base;
    base.clip_id = annotation.clip_id;
    base.source = source;
    base.sce_label = annotation.sce_label;
    base.template_version = templates.version;
    for (std::size_t i = 0; i < sequence.frames.size(); ++i)
        base.frame_indices[i] = sequence.frames[i].raw_frame_index;
    if (include_imu) {
        std::array<FrameTelemetry, kFrameCount> telemetry{};
        for (std::size_t i = 0; i < sequence.frames.size(); ++i) {
            const SyncedFrame& frame = sequence.frames[i];
            telemetry[i] = FrameTelemetry{frame.accel(0), frame.accel(1), frame.accel(2),
                                          frame.delta_angle_deg, frame.speed_mps};
        }
        base.telemetry = telemetry;
    }

    std::vector<TrainingExample> examples;
    examples.reserve(2 + annotation.qa.size());

    TrainingExample caption = base;
    caption.example_id = annotation.clip_id + ":caption";
    caption.task = Task::Caption;
    caption.prompt_text = student_prompt + "\n" + templates.task_caption;
    caption.target_text = annotation.caption;
    examples.push_back(std::move(caption));

    for (std::size_t i = 0; i < annotation.qa.size(); ++i) {
        const QaPair& pair = annotation.qa[i];
        TrainingExample qa = base;
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), ":qa%02zu", i);
        qa.example_id = annotation.clip_id + suffix;
        qa.task = pair.kind == QaPair::Kind::Open ? Task::OpenQa : Task::ClosedQa;
        std::string instruction = templates.task_qa;
        const std::string needle = "{question}";
        if (std::size_t pos = instruction.find(needle); pos != std::string::npos)
            instruction.replace(pos, needle.size(), pair.question);
        qa.prompt_text = student_prompt + "\n" + instruction;
        qa.target_text = pair.answer;
        examples.push_back(std::move(qa));
    }

    TrainingExample sce = base;
    sce.example_id = annotation.clip_id + ":sce";
    sce.task = Task::SceCls;
    sce.prompt_text = student_prompt + "\n" + templates.task_sce;
    sce.target_text = sceToken(annotation.sce_label);
    examples.push_back(std::move(sce));

    return examples;
}

DatasetReport writeDataset(std::vector<TrainingExample> examples, const TrainingManifest& manifest,
                           std::span<const ClipBuildInfo> clips, const std::string& out_dir,
                           std::uint64_t run_seed, const std::string& template_version,
                           std::span<const std::pair<std::string, std::string>> failures) {
    std::sort(examples.begin(), examples.end(),
              [](const TrainingExample& a, const TrainingExample& b) {
                  return a.example_id < b.example_id;
              });
    for (std::size_t i = 1; i < examples.size(); ++i)
        if (examples[i].example_id == examples[i - 1].example_id)
            throw Error(Errc::DuplicateExampleId, examples[i].example_id);

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(Errc::IoError, out_dir + ": " + ec.message());

    DatasetReport report;
    report.run_seed = run_seed;
    report.template_version = template_version;
    report.n_clips = clips.size();
    for (const ClipBuildInfo& clip : clips) {
        if (clip.dropped_imu) ++report.n_dropped;
        ++report.per_source[sourceName(clip.source)];
    }
    report.dropout_rate =
        clips.empty() ? 0.0
                      : static_cast<double>(report.n_dropped) / static_cast<double>(clips.size());
    report.n_examples = examples.size();
    report.failures.assign(failures.begin(), failures.end());
    std::sort(report.failures.begin(), report.failures.end());

    std::vector<Record> train_rows, val_rows;
    std::map<std::string, std::vector<Record>> test_rows;
    for (Source source : {Source::Private, Source::Bddx, Source::Nexar})
        test_rows[sourceName(source)] = {};
    for (const TrainingExample& example : examples) {
        ++report.per_split[splitName(example.split)];
        ++report.per_task[taskName(example.task)];
        Record record = example.toRecord();
        switch (example.split) {
            case Split::Train: train_rows.push_back(std::move(record)); break;
            case Split::Val: val_rows.push_back(std::move(record)); break;
            case Split::Test:
                test_rows[sourceName(example.source)].push_back(std::move(record));
                break;
        }
    }

    const std::filesystem::path base(out_dir);
    writeRecordsFile((base / "train.records").string(), train_rows);
    writeRecordsFile((base / "val.records").string(), val_rows);
    for (const auto& [source, rows] : test_rows)
        writeRecordsFile((base / ("test." + source + ".records")).string(), rows);

    Record manifest_record = manifest.toRecord();
    manifest_record.set("run_seed", std::to_string(run_seed));
    manifest_record.set("template_version", template_version);
    writeRecordsFile((base / "manifest.records").string(), {manifest_record});

    std::ostringstream text;
    text << "dataset report\n";
    text << "run_seed: " << run_seed << "\n";
    text << "template_version: " << template_version << "\n";
    text << "clips: " << report.n_clips;
    for (const auto& [source, count] : report.per_source)
        text << " " << source << "=" << count;
    text << "\n";
    char rate[32];
    std::snprintf(rate, sizeof(rate), "%.4f", report.dropout_rate);
    text << "imu_dropout: " << report.n_dropped << "/" << report.n_clips << " (" << rate << ")\n";
    text << "examples: " << report.n_examples << "\n";
    for (const auto& [split, count] : report.per_split)
        text << "split " << split << ": " << count << "\n";
    for (const auto& [task, count] : report.per_task)
        text << "task " << task << ": " << count << "\n";
    text << "failures: " << report.failures.size() << "\n";
    for (const auto& [clip_id, message] : report.failures)
        text << "  " << clip_id << ": " << message << "\n";

    std::ofstream out(base / "report.txt", std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write report.txt");
    out << text.str();
    if (!out) throw Error(Errc::IoError, "write failed for report.txt");

    return report;
}

std::vector<TrainingExample> readExamplesFile(const std::string& path) {
    std::vector<TrainingExample> examples;
    for (const Record& record : readRecordsFile(path))
        examples.push_back(TrainingExample::fromRecord(record));
    return examples;
}

} // namespace scepipe
