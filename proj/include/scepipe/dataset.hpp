#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scepipe/prompt.hpp"
#include "scepipe/teacher.hpp"

namespace scepipe {

enum class Split { Train, Val, Test };
const char* splitName(Split split);
Split parseSplit(const std::string& name);

enum class Task { Caption, OpenQa, ClosedQa, SceCls };
const char* taskName(Task task);
Task parseTask(const std::string& name);

/// Per-frame telemetry payload carried by a training row.
struct FrameTelemetry {
    double ax = 0.0, ay = 0.0, az = 0.0;
    double dalpha = 0.0;
    double v = 0.0;
};

struct TrainingExample {
    std::string example_id;
    std::string clip_id;
    Source source = Source::Private;
    Split split = Split::Train;
    Task task = Task::Caption;
    FrameIndices frame_indices{};
    std::optional<std::array<FrameTelemetry, kFrameCount>> telemetry;
    std::string prompt_text;
    std::string target_text;
    SceClass sce_label = SceClass::Normal;
    std::string template_version;

    Record toRecord() const;
    static TrainingExample fromRecord(const Record& record);
};

/// Fine-tuning hyperparameters emitted verbatim into every dataset run
/// directory. Training itself happens elsewhere; this is the contract the
/// trainer reads.
struct TrainingManifest {
    std::string adapter_method = "DoRA";
    int rank = 32;
    int alpha = 64;
    double learning_rate = 5e-5;
    int batch_size = 32;
    int image_width = 420;
    int image_height = 240;
    double clip_seconds = 6.0;
    int fps = 3;
    int neftune_noise = 5;
    std::string frozen = "vision_encoder,projection_layer";
    std::string student_model_id = "qwen2.5-vl-7b-instruct";

    Record toRecord() const;
};

constexpr double kImuDropoutProbability = 0.5;

/// Deterministic Bernoulli(0.5) keyed on (run_seed, clip_id): identical
/// across iteration orders and machines.
bool imuDropoutDecision(std::uint64_t run_seed, const std::string& clip_id);

struct SplitRatios {
    double train = 0.90;
    double val = 0.05;
    double test = 0.05;
};

/// Hash of clip_id alone -> unit interval -> cumulative ratios, so every
/// example of a clip lands in one split. Throws Errc::BadRatios.
Split assignSplit(const std::string& clip_id, Source source, const SplitRatios& ratios = {});

/// One caption row, one row per QA pair, one sce_cls row whose target is the
/// canonical label token. The prompt is the student rendering (frames +
/// telemetry only, never semantic metadata); telemetry is attached iff the
/// clip has an IMU stream, is not a Nexar-style source, and the drop-out
/// decision was false.
std::vector<TrainingExample> buildExamples(const TeacherAnnotation& annotation,
                                           const SyncedSequence& sequence, Source source,
                                           bool drop_imu, const PromptTemplates& templates);

/// Per-clip facts backing the run report.
struct ClipBuildInfo {
    std::string clip_id;
    Source source = Source::Private;
    Split split = Split::Train;
    bool dropped_imu = false;
    bool has_telemetry = false;
};

struct DatasetReport {
    std::uint64_t run_seed = 0;
    std::string template_version;
    std::size_t n_clips = 0;
    std::size_t n_dropped = 0;
    double dropout_rate = 0.0;
    std::size_t n_examples = 0;
    std::map<std::string, std::size_t> per_split;
    std::map<std::string, std::size_t> per_task;
    std::map<std::string, std::size_t> per_source;
    std::vector<std::pair<std::string, std::string>> failures;
};

/// Writes train.records, val.records, test.<source>.records (one per known
/// source), manifest.records and report.txt under out_dir. Examples are
/// sorted by example_id; rerunning with identical inputs and seed is
/// byte-identical. Throws Errc::DuplicateExampleId / Errc::IoError.
DatasetReport writeDataset(std::vector<TrainingExample> examples,
                           const TrainingManifest& manifest,
                           std::span<const ClipBuildInfo> clips, const std::string& out_dir,
                           std::uint64_t run_seed, const std::string& template_version,
                           std::span<const std::pair<std::string, std::string>> failures = {});

std::vector<TrainingExample> readExamplesFile(const std::string& path);

} // namespace scepipe
