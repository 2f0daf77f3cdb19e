#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scepipe/dataset.hpp"
#include "scepipe/eval.hpp"
#include "scepipe/synth.hpp"
#include "scepipe/teacher.hpp"

namespace scepipe {

/// Stage drivers shared by the CLI and the integration tests. Every stage
/// reads and writes files only (no hidden state), so stages can be rerun
/// independently; all outputs are byte-stable for fixed inputs and seed.

struct StageOutcome {
    int processed = 0;
    int succeeded = 0;
    int skipped = 0;
    std::vector<std::pair<std::string, std::string>> failures; // clip_id -> message

    bool ok() const { return failures.empty(); }
};

// ---- synth ----------------------------------------------------------------

struct SynthCorpusOptions {
    std::string out_dir;
    int count = 20;
    std::uint64_t seed = 7;
    /// "mix" cycles normal / near-collision / collision with mixed sources
    /// (every 4th clip Nexar-style without telemetry, every 4th BDD-X-style
    /// 6 s); a fixed kind makes a uniform private corpus.
    std::string kind = "mix";
};

StageOutcome runSynthStage(const SynthCorpusOptions& options);

// ---- sync -----------------------------------------------------------------

struct SyncStageOptions {
    std::string manifest_path;
    std::string out_dir;
    int jobs = 4;
    bool write_tables = false; // per-clip plain-text table next to the records
};

StageOutcome runSyncStage(const SyncStageOptions& options);

void writeSyncedSequenceFile(const std::string& path, const SyncedSequence& sequence);
SyncedSequence readSyncedSequenceFile(const std::string& path);

// ---- annotate ---------------------------------------------------------------

struct AnnotateStageOptions {
    std::string manifest_path;
    std::string sync_dir;
    std::string out_dir;
    bool mock_teacher = false;
    std::uint64_t seed = 0;
    int qa_target = 10;
    SceThresholds thresholds; // mock teacher severity thresholds
    std::string endpoint_config_path; // required unless mock_teacher
    int jobs = 4;
    bool retry_failed = false;
    bool no_imu = false; // force telemetry out of the teacher prompt
    std::string templates_dir;
};

StageOutcome runAnnotateStage(const AnnotateStageOptions& options);

std::vector<TeacherAnnotation> readAnnotationsFile(const std::string& path);

// ---- build ------------------------------------------------------------------

struct BuildStageOptions {
    std::string manifest_path;
    std::string sync_dir;
    std::string annotations_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    SplitRatios ratios;
    bool no_imu = false;            // force the drop-out decision true
    double nexar_keep_fraction = 1.0; // deterministic subsample of Nexar clips
    std::string templates_dir;
};

StageOutcome runBuildStage(const BuildStageOptions& options, DatasetReport* report_out = nullptr);

// ---- eval -------------------------------------------------------------------

struct EvalStageOptions {
    std::string dataset_dir;                  // reads every test.<source>.records
    std::vector<std::string> reference_files; // alternative: explicit records files
    std::string predictions_path;
    std::string out_dir;
    std::string bertscore_path; // optional external example_id -> score file
};

StageOutcome runEvalStage(const EvalStageOptions& options, EvalReport* report_out = nullptr);

// ---- shared helpers ---------------------------------------------------------

/// Content hash over sorted relative paths and file bytes; 16 hex chars.
std::string hashDirectory(const std::string& dir);

} // namespace scepipe
