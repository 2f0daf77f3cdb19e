#include "scepipe/pipeline.hpp"

#include "scepipe/error.hpp"
#include "scepipe/hash.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace scepipe {

namespace fs = std::filesystem;

namespace {

void ensureDir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::IoError, dir.string() + ": " + ec.message());
}

void writeTextFile(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
    out << text;
    if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

std::string format3(double value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3f", value);
    return buf;
}

} // namespace

// ---- synth ------------------------------------------------------------------

StageOutcome runSynthStage(const SynthCorpusOptions& options) {
    StageOutcome outcome;
    const fs::path base(options.out_dir);
    ensureDir(base / "clips");

    const bool mix = options.kind == "mix";
    SceClass fixed_kind = SceClass::Normal;
    if (!mix) fixed_kind = parseSceToken(options.kind); // throws UnknownSceLabel

    std::vector<ClipManifest> manifests;
    std::vector<Record> truth_records;
    {
        Record run;
        run.set("type", "run");
        run.set("run_seed", std::to_string(options.seed));
        run.set("n", static_cast<std::int64_t>(options.count));
        run.set("kind", options.kind);
        truth_records.push_back(std::move(run));
    }

    for (int i = 0; i < options.count; ++i) {
        char id_buf[32];
        std::snprintf(id_buf, sizeof(id_buf), "demo-%04d", i);
        const std::string clip_id = id_buf;
        ++outcome.processed;

        const SceClass kind = mix ? std::array{SceClass::Normal, SceClass::NearCollision,
                                               SceClass::Collision}[i % 3]
                                  : fixed_kind;
        Source source = Source::Private;
        if (mix && i % 4 == 3) source = Source::Nexar;
        else if (mix && i % 4 == 1) source = Source::Bddx;
        const double duration = source == Source::Private ? 16.0 : 6.0;
        const bool has_imu = source != Source::Nexar;

        const std::uint64_t clip_seed = hash64(options.seed, clip_id);
        DeterministicRng rng(clip_seed);
        const double u_event = rng.nextUnit();
        const double u_amp = rng.nextUnit();
        const double u_speed = rng.nextUnit();
        const double u_box = rng.nextUnit();

        SynthProfile profile;
        profile.kind = kind;
        profile.seed = clip_seed;
        profile.event_time_s = 1.0 + u_event * (duration - 2.0);
        profile.base_speed_mps = 8.0 + 18.0 * u_speed;
        profile.noise_sigma = 0.05;
        // Amplitude bands keep each kind on its side of the default
        // thresholds with margin for sigma-level noise.
        if (kind == SceClass::Collision) profile.spike_amplitude_mps2 = -(10.5 + 4.5 * u_amp);
        else if (kind == SceClass::NearCollision) profile.spike_amplitude_mps2 = -(4.5 + 4.5 * u_amp);
        else profile.spike_amplitude_mps2 = 0.0;

        const SynthResult synth = synthTrace(profile, duration);

        ClipManifest manifest;
        manifest.clip_id = clip_id;
        manifest.duration_s = duration;
        manifest.fps = 30.0;
        manifest.width = 1280;
        manifest.height = 720;
        manifest.frame_path_pattern = "frames/" + clip_id + "/{idx}.jpg";
        manifest.source = source;

        if (has_imu) {
            const std::string imu_rel = "clips/" + clip_id + ".imu.csv";
            const std::string gps_rel = "clips/" + clip_id + ".gps.csv";
            writeImuTrace((base / imu_rel).string(), synth.imu);
            writeGpsTrace((base / gps_rel).string(), synth.gps);
            manifest.imu_path = imu_rel;
            manifest.gps_path = gps_rel;
        }

        SemanticMetadata meta;
        if (kind == SceClass::Collision) {
            meta.crash_detected = true;
        } else if (kind == SceClass::NearCollision) {
            meta.maneuver = Maneuver::HardBrake;
            meta.maneuver_raw = maneuverName(Maneuver::HardBrake);
        }
        if (i % 5 == 2) meta.traffic_light_violation = true;
        if (i % 7 == 5) meta.stop_sign_severity = 0.4 + 0.5 * rng.nextUnit();
        {
            // One tracked car near the event ordinal; collisions add the
            // struck pedestrian.
            const double x1 = 0.25 + 0.3 * u_box;
            for (int k : {12, 13, 14}) {
                Detection det;
                det.k = k;
                det.class_label = "car";
                det.x1 = x1;
                det.y1 = 0.40;
                det.x2 = x1 + 0.18;
                det.y2 = 0.62;
                det.track_id = 1;
                meta.detections.push_back(det);
            }
            if (kind == SceClass::Collision) {
                Detection det;
                det.k = 13;
                det.class_label = "pedestrian";
                det.x1 = 0.48;
                det.y1 = 0.35;
                det.x2 = 0.55;
                det.y2 = 0.70;
                det.track_id = 2;
                meta.detections.push_back(det);
            }
        }
        const std::string semantic_rel = "clips/" + clip_id + ".semantic.records";
        writeSemanticMetadata((base / semantic_rel).string(), clip_id, meta);
        manifest.semantic_path = semantic_rel;
        manifests.push_back(std::move(manifest));

        Record truth;
        truth.set("type", "clip");
        truth.set("clip_id", clip_id);
        truth.set("kind", sceToken(synth.truth.kind));
        truth.set("event_time_s", synth.truth.event_time_s);
        truth.set("spike_amplitude_mps2", synth.truth.spike_amplitude_mps2);
        truth.set("spike_width_ms", synth.truth.spike_width_ms);
        truth.set("base_speed_mps", synth.truth.base_speed_mps);
        truth.set("noise_sigma", synth.truth.noise_sigma);
        truth.set("seed", std::to_string(synth.truth.seed));
        truth.set("duration_s", synth.truth.duration_s);
        truth.set("source", sourceName(source));
        truth.set("has_imu", has_imu);
        truth_records.push_back(std::move(truth));
        ++outcome.succeeded;
    }

    writeClipManifests((base / "manifest.records").string(), manifests);
    writeRecordsFile((base / "truth.records").string(), truth_records);
    return outcome;
}

// ---- sync -------------------------------------------------------------------

void writeSyncedSequenceFile(const std::string& path, const SyncedSequence& sequence) {
    std::vector<Record> records;
    Record header;
    header.set("type", "window");
    header.set("clip_id", sequence.clip_id);
    header.set("t_event", sequence.window.t_event);
    header.set("t_start", sequence.window.t_start);
    header.set("t_end", sequence.window.t_end);
    header.set("has_telemetry", sequence.has_telemetry);
    records.push_back(std::move(header));
    for (const SyncedFrame& frame : sequence.frames) {
        Record row;
        row.set("type", "frame");
        row.set("k", static_cast<std::int64_t>(frame.k));
        row.set("t", frame.t);
        row.set("raw_frame_index", static_cast<std::int64_t>(frame.raw_frame_index));
        row.set("ax", frame.accel(0));
        row.set("ay", frame.accel(1));
        row.set("az", frame.accel(2));
        row.set("dalpha", frame.delta_angle_deg);
        row.set("v", frame.speed_mps);
        records.push_back(std::move(row));
    }
    writeRecordsFile(path, records);
}

SyncedSequence readSyncedSequenceFile(const std::string& path) {
    const std::vector<Record> records = readRecordsFile(path);
    if (records.size() != 1 + kFrameCount)
        throw Error(Errc::MalformedRecord,
                    path + ": expected " + std::to_string(1 + kFrameCount) + " records");
    const Record& header = records.front();
    if (header.get("type") != "window")
        throw Error(Errc::MalformedRecord, path + ": first record must be the window");
    SyncedSequence sequence;
    sequence.clip_id = header.get("clip_id");
    sequence.window.t_event = header.getDouble("t_event");
    sequence.window.t_start = header.getDouble("t_start");
    sequence.window.t_end = header.getDouble("t_end");
    sequence.has_telemetry = header.getBool("has_telemetry");
    for (int k = 1; k <= kFrameCount; ++k) {
        const Record& row = records[static_cast<std::size_t>(k)];
        if (row.get("type") != "frame" || row.getInt("k") != k)
            throw Error(Errc::MalformedRecord, path + ": frame records out of order");
        SyncedFrame& frame = sequence.frames[static_cast<std::size_t>(k - 1)];
        frame.k = k;
        frame.t = row.getDouble("t");
        frame.raw_frame_index = row.getInt("raw_frame_index");
        frame.accel = Eigen::Array3d(row.getDouble("ax"), row.getDouble("ay"), row.getDouble("az"));
        frame.delta_angle_deg = row.getDouble("dalpha");
        frame.speed_mps = row.getDouble("v");
    }
    return sequence;
}

namespace {

std::string renderSyncTable(const SyncedSequence& seq) {
    std::ostringstream out;
    out << "clip " << seq.clip_id << "  t_e=" << format3(seq.window.t_event) << "  window=["
        << format3(seq.window.t_start) << "," << format3(seq.window.t_end) << "]  telemetry="
        << (seq.has_telemetry ? "yes" : "no") << "\n";
    out << "  k   t_s      frame   ax        ay        az        dA_deg            v_mps\n";
    for (const SyncedFrame& f : seq.frames) {
        char line[160];
        std::snprintf(line, sizeof(line), "%3d   %-8.3f %-7ld %-9.3f %-9.3f %-9.3f %-17.6f %-8.3f\n",
                      f.k, f.t, f.raw_frame_index, f.accel(0), f.accel(1), f.accel(2),
                      f.delta_angle_deg, f.speed_mps);
        out << line;
    }
    return out.str();
}

fs::path resolveRelative(const fs::path& anchor_file, const std::string& maybe_relative) {
    fs::path path(maybe_relative);
    if (path.is_absolute()) return path;
    return anchor_file.parent_path() / path;
}

void writeFailuresFile(const fs::path& path,
                       const std::vector<std::pair<std::string, std::string>>& failures) {
    std::vector<Record> records;
    for (const auto& [clip_id, message] : failures) {
        Record record;
        record.set("type", "failure");
        record.set("clip_id", clip_id);
        record.set("error", message);
        records.push_back(std::move(record));
    }
    writeRecordsFile(path.string(), records);
}

} // namespace

StageOutcome runSyncStage(const SyncStageOptions& options) {
    const fs::path manifest_path(options.manifest_path);
    const std::vector<ClipManifest> clips = loadClipManifests(options.manifest_path);
    const fs::path out_base(options.out_dir);
    ensureDir(out_base / "sync");

    StageOutcome outcome;
    outcome.processed = static_cast<int>(clips.size());
    std::mutex failures_mutex;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        while (true) {
            const std::size_t index = next.fetch_add(1);
            if (index >= clips.size()) return;
            const ClipManifest& clip = clips[index];
            try {
                SyncedSequence sequence;
                if (clip.imu_path && clip.gps_path) {
                    const ImuTrace imu =
                        loadImuTrace(resolveRelative(manifest_path, *clip.imu_path).string());
                    const GpsTrace gps =
                        loadGpsTrace(resolveRelative(manifest_path, *clip.gps_path).string());
                    sequence = buildSyncedSequence(imu, gps, clip);
                } else if (!clip.imu_path && !clip.gps_path) {
                    sequence = buildUntimedSequence(clip);
                } else {
                    throw Error(Errc::MissingFile,
                                clip.clip_id + ": manifest lists only one of imu_path/gps_path");
                }
                writeSyncedSequenceFile((out_base / "sync" / (clip.clip_id + ".records")).string(),
                                        sequence);
                if (options.write_tables)
                    writeTextFile(out_base / "sync" / (clip.clip_id + ".txt"),
                                  renderSyncTable(sequence));
            } catch (const Error& err) {
                std::lock_guard<std::mutex> lock(failures_mutex);
                outcome.failures.emplace_back(clip.clip_id, err.what());
            }
        }
    };

    const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(clips.size())));
    std::vector<std::thread> threads;
    for (int i = 0; i < jobs; ++i) threads.emplace_back(worker);
    for (std::thread& thread : threads) thread.join();

    std::sort(outcome.failures.begin(), outcome.failures.end());
    outcome.succeeded = outcome.processed - static_cast<int>(outcome.failures.size());
    writeFailuresFile(out_base / "sync_failures.records", outcome.failures);
    return outcome;
}

// ---- annotate -----------------------------------------------------------------

namespace {

std::vector<Record> annotationToRecords(const TeacherAnnotation& annotation) {
    std::vector<Record> records;
    Record head;
    head.set("type", "annotation");
    head.set("clip_id", annotation.clip_id);
    head.set("caption", annotation.caption);
    head.set("sce", sceToken(annotation.sce_label));
    head.set("qa_count", static_cast<std::int64_t>(annotation.qa.size()));
    head.set("raw_response", annotation.raw_response);
    records.push_back(std::move(head));
    for (std::size_t i = 0; i < annotation.qa.size(); ++i) {
        const QaPair& pair = annotation.qa[i];
        Record row;
        row.set("type", "qa");
        row.set("clip_id", annotation.clip_id);
        row.set("idx", static_cast<std::int64_t>(i));
        row.set("kind", pair.kind == QaPair::Kind::Open ? "open" : "closed");
        row.set("q", pair.question);
        row.set("a", pair.answer);
        records.push_back(std::move(row));
    }
    return records;
}

} // namespace

std::vector<TeacherAnnotation> readAnnotationsFile(const std::string& path) {
    std::map<std::string, TeacherAnnotation> by_clip;
    std::map<std::string, std::map<std::int64_t, QaPair>> qa_by_clip;
    for (const Record& record : readRecordsFile(path)) {
        const std::string type = record.get("type");
        if (type == "run") continue;
        if (type == "annotation") {
            TeacherAnnotation annotation;
            annotation.clip_id = record.get("clip_id");
            annotation.caption = record.get("caption");
            annotation.sce_label = parseSceToken(record.get("sce"));
            annotation.raw_response = record.get("raw_response");
            by_clip[annotation.clip_id] = std::move(annotation);
        } else if (type == "qa") {
            QaPair pair;
            pair.question = record.get("q");
            pair.answer = record.get("a");
            pair.kind = record.get("kind") == "closed" ? QaPair::Kind::Closed : QaPair::Kind::Open;
            qa_by_clip[record.get("clip_id")][record.getInt("idx")] = std::move(pair);
        } else {
            throw Error(Errc::MalformedRecord, path + ": unknown record type \"" + type + "\"");
        }
    }
    std::vector<TeacherAnnotation> annotations;
    for (auto& [clip_id, annotation] : by_clip) {
        for (auto& [idx, pair] : qa_by_clip[clip_id]) annotation.qa.push_back(std::move(pair));
        annotations.push_back(std::move(annotation));
    }
    return annotations;
}

StageOutcome runAnnotateStage(const AnnotateStageOptions& options) {
    const fs::path manifest_path(options.manifest_path);
    const std::vector<ClipManifest> clips = loadClipManifests(options.manifest_path);
    const fs::path out_base(options.out_dir);
    ensureDir(out_base);
    const fs::path annotations_path = out_base / "annotations.records";
    const fs::path failures_path = out_base / "annotate_failures.records";

    const PromptTemplates templates = options.templates_dir.empty()
                                          ? PromptTemplates::defaults()
                                          : loadPromptTemplates(options.templates_dir);

    // Batch semantics: clips already annotated are skipped; clips recorded
    // as failed are skipped too unless --retry-failed re-queues them.
    std::map<std::string, TeacherAnnotation> existing;
    if (fs::exists(annotations_path))
        for (TeacherAnnotation& annotation : readAnnotationsFile(annotations_path.string()))
            existing[annotation.clip_id] = std::move(annotation);
    std::map<std::string, std::string> previously_failed;
    if (fs::exists(failures_path))
        for (const Record& record : readRecordsFile(failures_path.string()))
            previously_failed[record.get("clip_id")] = record.get("error");

    StageOutcome outcome;
    std::vector<ClipJob> jobs;
    for (const ClipManifest& clip : clips) {
        ++outcome.processed;
        if (existing.count(clip.clip_id)) {
            ++outcome.skipped;
            continue;
        }
        if (auto it = previously_failed.find(clip.clip_id);
            it != previously_failed.end() && !options.retry_failed) {
            ++outcome.skipped;
            outcome.failures.emplace_back(it->first, it->second); // carried forward
            continue;
        }
        const fs::path sync_file = fs::path(options.sync_dir) / (clip.clip_id + ".records");
        try {
            if (!fs::exists(sync_file))
                throw Error(Errc::MissingFile, clip.clip_id + ": no sync output " +
                                                   sync_file.string());
            const SyncedSequence sequence = readSyncedSequenceFile(sync_file.string());
            SemanticMetadata meta;
            if (clip.semantic_path)
                meta = loadSemanticMetadata(
                    resolveRelative(manifest_path, *clip.semantic_path).string());
            const MetadataSummary summary = summarizeMetadata(meta, sequence.frames);

            ClipJob job;
            job.clip_id = clip.clip_id;
            job.bundle.clip_id = clip.clip_id;
            job.bundle.system_prompt = renderSystemPrompt(templates, TaskProfile::CaptionAndQa);
            job.bundle.include_imu = sequence.has_telemetry && !options.no_imu;
            job.bundle.user_segments = renderUserPrompt(
                templates, std::span<const SyncedFrame>(sequence.frames), summary,
                job.bundle.include_imu, sequence.window.t_event);
            job.bundle.template_version = templates.version;
            for (const SyncedFrame& frame : sequence.frames)
                job.frame_refs.push_back(clip.framePath(frame.raw_frame_index));
            jobs.push_back(std::move(job));
        } catch (const Error& err) {
            outcome.failures.emplace_back(clip.clip_id, err.what());
        }
    }

    std::unique_ptr<TeacherTransport> owned_transport;
    AnnotateOptions run_options;
    run_options.concurrency = options.jobs;
    if (options.mock_teacher) {
        MockTeacherConfig config;
        config.seed = options.seed;
        config.qa_target = options.qa_target;
        config.thresholds = options.thresholds;
        owned_transport = std::make_unique<MockTransport>(config);
        run_options.max_retries = 0;
    } else {
        if (options.endpoint_config_path.empty())
            throw Error(Errc::InvalidValue, "annotate needs --mock-teacher or --endpoint-config");
        const EndpointConfig endpoint = EndpointConfig::load(options.endpoint_config_path);
        owned_transport = makeHttpTransport(endpoint);
        run_options.max_retries = endpoint.max_retries;
        run_options.concurrency = std::min(options.jobs, endpoint.concurrency);
        run_options.backoff_base_ms = endpoint.backoff_base_ms;
    }

    RunReport run_report;
    const std::vector<std::optional<TeacherAnnotation>> results =
        runAnnotationBatch(jobs, *owned_transport, run_options, run_report);
    for (std::size_t i = 0; i < jobs.size(); ++i)
        if (results[i]) existing[jobs[i].clip_id] = *results[i];
    for (const auto& failure : run_report.failures) outcome.failures.push_back(failure);
    std::sort(outcome.failures.begin(), outcome.failures.end());

    std::vector<Record> records;
    {
        Record run;
        run.set("type", "run");
        run.set("run_seed", std::to_string(options.seed));
        run.set("template_version", templates.version);
        run.set("teacher", options.mock_teacher ? "mock" : "endpoint");
        run.set("qa_target", static_cast<std::int64_t>(options.qa_target));
        records.push_back(std::move(run));
    }
    for (const auto& [clip_id, annotation] : existing)
        for (Record& record : annotationToRecords(annotation)) records.push_back(std::move(record));
    writeRecordsFile(annotations_path.string(), records);
    writeFailuresFile(failures_path, outcome.failures);

    outcome.succeeded = static_cast<int>(existing.size());
    return outcome;
}

// ---- build --------------------------------------------------------------------

StageOutcome runBuildStage(const BuildStageOptions& options, DatasetReport* report_out) {
    const std::vector<ClipManifest> clips = loadClipManifests(options.manifest_path);
    std::map<std::string, const ClipManifest*> clip_index;
    for (const ClipManifest& clip : clips) clip_index[clip.clip_id] = &clip;

    const PromptTemplates templates = options.templates_dir.empty()
                                          ? PromptTemplates::defaults()
                                          : loadPromptTemplates(options.templates_dir);

    std::vector<TeacherAnnotation> annotations;
    if (fs::exists(options.annotations_path))
        annotations = readAnnotationsFile(options.annotations_path);

    StageOutcome outcome;
    std::vector<TrainingExample> examples;
    std::vector<ClipBuildInfo> infos;
    for (const TeacherAnnotation& annotation : annotations) {
        ++outcome.processed;
        try {
            auto it = clip_index.find(annotation.clip_id);
            if (it == clip_index.end())
                throw Error(Errc::MissingFile, annotation.clip_id + ": not in the clip manifest");
            const ClipManifest& clip = *it->second;

            if (clip.source == Source::Nexar && options.nexar_keep_fraction < 1.0) {
                const double u = toUnitInterval(hash64("nexar-keep|" + clip.clip_id));
                if (u >= options.nexar_keep_fraction) {
                    ++outcome.skipped;
                    continue;
                }
            }

            const fs::path sync_file = fs::path(options.sync_dir) / (clip.clip_id + ".records");
            const SyncedSequence sequence = readSyncedSequenceFile(sync_file.string());

            const bool drop = options.no_imu || imuDropoutDecision(options.seed, clip.clip_id);
            const Split split = assignSplit(clip.clip_id, clip.source, options.ratios);

            std::vector<TrainingExample> clip_examples =
                buildExamples(annotation, sequence, clip.source, drop, templates);
            for (TrainingExample& example : clip_examples) {
                example.split = split;
                examples.push_back(std::move(example));
            }

            ClipBuildInfo info;
            info.clip_id = clip.clip_id;
            info.source = clip.source;
            info.split = split;
            info.dropped_imu = drop;
            info.has_telemetry = sequence.has_telemetry;
            infos.push_back(std::move(info));
            ++outcome.succeeded;
        } catch (const Error& err) {
            outcome.failures.emplace_back(annotation.clip_id, err.what());
        }
    }
    std::sort(outcome.failures.begin(), outcome.failures.end());

    DatasetReport report =
        writeDataset(std::move(examples), TrainingManifest{}, infos, options.out_dir, options.seed,
                     templates.version, outcome.failures);
    if (report_out) *report_out = std::move(report);
    return outcome;
}

// ---- eval ---------------------------------------------------------------------

StageOutcome runEvalStage(const EvalStageOptions& options, EvalReport* report_out) {
    std::vector<std::string> reference_files = options.reference_files;
    if (!options.dataset_dir.empty()) {
        for (Source source : {Source::Private, Source::Bddx, Source::Nexar}) {
            fs::path path =
                fs::path(options.dataset_dir) / ("test." + std::string(sourceName(source)) +
                                                 ".records");
            if (fs::exists(path)) reference_files.push_back(path.string());
        }
    }
    if (reference_files.empty())
        throw Error(Errc::MissingFile, "no reference files (dataset dir or --references)");

    std::map<std::string, TrainingExample> references;
    for (const std::string& file : reference_files)
        for (TrainingExample& example : readExamplesFile(file)) {
            const std::string id = example.example_id;
            if (!references.emplace(id, std::move(example)).second)
                throw Error(Errc::DuplicateExampleId, id);
        }

    std::map<std::string, std::string> predictions;
    for (const Record& record : readRecordsFile(options.predictions_path)) {
        const std::string id = record.get("example_id");
        if (!predictions.emplace(id, record.get("prediction_text")).second)
            throw Error(Errc::DuplicateExampleId, options.predictions_path + ": " + id);
    }

    if (predictions.size() != references.size())
        throw Error(Errc::LengthMismatch,
                    std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(references.size()) + " reference rows");
    std::vector<PredictionRecord> rows;
    for (const auto& [id, example] : references) {
        auto it = predictions.find(id);
        if (it == predictions.end())
            throw Error(Errc::LengthMismatch, "no prediction for example " + id);
        PredictionRecord row;
        row.example_id = id;
        row.task = taskName(example.task);
        row.source = sourceName(example.source);
        row.prediction_text = it->second;
        row.reference_text = example.target_text;
        if (example.task == Task::SceCls) row.sce_label = example.sce_label;
        rows.push_back(std::move(row));
    }

    std::map<std::string, double> external_scores;
    bool have_external = false;
    if (!options.bertscore_path.empty()) {
        have_external = true;
        for (const Record& record : readRecordsFile(options.bertscore_path)) {
            const std::string id = record.get("example_id");
            if (!references.count(id))
                throw Error(Errc::InvalidValue,
                            options.bertscore_path + ": unknown example_id " + id);
            external_scores[id] = record.getDouble("score");
        }
    }

    const EvalReport report = evaluateRows(rows, have_external ? &external_scores : nullptr);

    const fs::path out_base(options.out_dir);
    ensureDir(out_base);
    writeTextFile(out_base / "eval_report.txt", renderEvalReportText(report));
    writeRecordsFile((out_base / "eval_report.records").string(), evalReportRecords(report));

    StageOutcome outcome;
    outcome.processed = static_cast<int>(rows.size());
    outcome.succeeded = outcome.processed;
    if (report_out) *report_out = report;
    return outcome;
}

// ---- shared helpers -------------------------------------------------------------

std::string hashDirectory(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::vector<std::pair<std::string, fs::path>> keyed;
    keyed.reserve(files.size());
    for (const fs::path& path : files)
        keyed.emplace_back(fs::relative(path, dir).generic_string(), path);
    std::sort(keyed.begin(), keyed.end());

    std::uint64_t state = kFnvOffset;
    for (const auto& [relative, path] : keyed) {
        state = fnv1a64(relative, state);
        state = fnv1a64(std::string_view("\0", 1), state);
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
        char buffer[1 << 16];
        while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0)
            state = fnv1a64(std::string_view(buffer, static_cast<std::size_t>(in.gcount())), state);
        state = fnv1a64(std::string_view("\0", 1), state);
    }
    return hex16(mix64(state));
}

} // namespace scepipe
