// scepipe — batch pipeline for safety-critical-event driving datasets.
//
// Subcommands: synth | sync | annotate | build | eval. Stages hand off
// through files only, so the expensive annotation step can be rerun in
// isolation. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <string>
#include <vector>

#include "scepipe/error.hpp"
#include "scepipe/pipeline.hpp"

namespace {

using namespace scepipe;

int reportOutcome(const char* stage, const StageOutcome& outcome) {
    std::printf("%s: %d processed, %d ok, %d skipped, %zu failed\n", stage, outcome.processed,
                outcome.succeeded, outcome.skipped, outcome.failures.size());
    for (const auto& [clip_id, message] : outcome.failures)
        std::fprintf(stderr, "  failed %s: %s\n", clip_id.c_str(), message.c_str());
    return outcome.ok() ? 0 : 1;
}

bool parseRatios(const std::string& text, SplitRatios& ratios) {
    double values[3];
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        std::size_t comma = text.find(',', pos);
        std::string part = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), values[i]);
        if (ec != std::errc{} || ptr != part.data() + part.size()) return false;
        if (comma == std::string::npos) {
            if (i != 2) return false;
            break;
        }
        pos = comma + 1;
    }
    if (values[0] < 0 || values[1] < 0 || values[2] < 0) return false;
    if (std::abs(values[0] + values[1] + values[2] - 1.0) > 1e-9) return false;
    ratios = SplitRatios{values[0], values[1], values[2]};
    return true;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"scepipe: dashcam SCE dataset pipeline"};
    app.require_subcommand(1);

    // synth
    SynthCorpusOptions synth_options;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic telemetry corpus");
    synth->add_option("--out", synth_options.out_dir, "output directory")->required();
    synth->add_option("--n", synth_options.count, "number of clips");
    synth->add_option("--seed", synth_options.seed, "corpus seed");
    synth->add_option("--kind", synth_options.kind,
                      "mix | normal | near-collision | collision");

    // sync
    SyncStageOptions sync_options;
    CLI::App* sync = app.add_subcommand("sync", "align telemetry to 18 frames per clip");
    sync->add_option("--manifest", sync_options.manifest_path, "clip manifest file")->required();
    sync->add_option("--out", sync_options.out_dir, "output directory")->required();
    sync->add_option("--jobs", sync_options.jobs, "parallel clips");
    sync->add_flag("--report", sync_options.write_tables, "write per-clip plain-text tables");

    // annotate
    AnnotateStageOptions annotate_options;
    CLI::App* annotate = app.add_subcommand("annotate", "request teacher annotations per clip");
    annotate->add_option("--manifest", annotate_options.manifest_path, "clip manifest file")
        ->required();
    annotate->add_option("--sync", annotate_options.sync_dir, "sync output directory (the sync/ "
                                                              "subdirectory)")
        ->required();
    annotate->add_option("--out", annotate_options.out_dir, "output directory")->required();
    annotate->add_flag("--mock-teacher", annotate_options.mock_teacher,
                       "use the deterministic built-in teacher");
    annotate->add_option("--seed", annotate_options.seed, "mock teacher seed");
    annotate->add_option("--qa-target", annotate_options.qa_target, "QA pairs per clip");
    annotate->add_option("--collision-threshold", annotate_options.thresholds.collision_mps2,
                         "mock teacher collision threshold, m/s^2");
    annotate->add_option("--near-threshold", annotate_options.thresholds.near_mps2,
                         "mock teacher near-collision threshold, m/s^2");
    annotate->add_option("--endpoint-config", annotate_options.endpoint_config_path,
                         "endpoint config records file");
    annotate->add_option("--jobs", annotate_options.jobs, "max in-flight requests");
    annotate->add_flag("--retry-failed", annotate_options.retry_failed,
                       "re-queue clips recorded as failed");
    annotate->add_flag("--no-imu", annotate_options.no_imu,
                       "exclude telemetry from teacher prompts");
    annotate->add_option("--templates", annotate_options.templates_dir,
                         "prompt template directory");

    // build
    BuildStageOptions build_options;
    std::string ratios_text;
    CLI::App* build = app.add_subcommand("build", "serialize training examples with splits");
    build->add_option("--manifest", build_options.manifest_path, "clip manifest file")->required();
    build->add_option("--sync", build_options.sync_dir, "sync output directory")->required();
    build->add_option("--annotations", build_options.annotations_path, "annotations records file")
        ->required();
    build->add_option("--out", build_options.out_dir, "dataset output directory")->required();
    build->add_option("--seed", build_options.seed, "run seed (drop-out decisions)");
    build->add_option("--ratios", ratios_text, "train,val,test ratios (default 0.9,0.05,0.05)");
    build->add_flag("--no-imu", build_options.no_imu, "force telemetry drop-out for every clip");
    build->add_option("--nexar-keep", build_options.nexar_keep_fraction,
                      "fraction of Nexar-style clips to keep");
    build->add_option("--templates", build_options.templates_dir, "prompt template directory");

    // eval
    EvalStageOptions eval_options;
    CLI::App* eval = app.add_subcommand("eval", "score predictions against reference rows");
    eval->add_option("--dataset", eval_options.dataset_dir,
                     "dataset directory (uses its test.<source>.records)");
    eval->add_option("--references", eval_options.reference_files,
                     "explicit reference records file(s)");
    eval->add_option("--predictions", eval_options.predictions_path,
                     "predictions records file (example_id, prediction_text)")
        ->required();
    eval->add_option("--out", eval_options.out_dir, "report output directory")->required();
    eval->add_option("--bertscore", eval_options.bertscore_path,
                     "external example_id -> score records file to merge");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, exit 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth) {
            if (synth_options.kind != "mix" && synth_options.kind != "normal" &&
                synth_options.kind != "near-collision" && synth_options.kind != "collision") {
                std::fprintf(stderr,
                             "error: --kind must be mix, normal, near-collision or collision\n");
                return 2;
            }
            return reportOutcome("synth", runSynthStage(synth_options));
        }
        if (*sync) return reportOutcome("sync", runSyncStage(sync_options));
        if (*annotate) return reportOutcome("annotate", runAnnotateStage(annotate_options));
        if (*build) {
            if (!ratios_text.empty() && !parseRatios(ratios_text, build_options.ratios)) {
                std::fprintf(stderr, "error: --ratios must be three non-negative numbers summing "
                                     "to 1, e.g. 0.9,0.05,0.05\n");
                return 2;
            }
            if (build_options.nexar_keep_fraction < 0.0 ||
                build_options.nexar_keep_fraction > 1.0) {
                std::fprintf(stderr, "error: --nexar-keep must be in [0, 1]\n");
                return 2;
            }
            return reportOutcome("build", runBuildStage(build_options));
        }
        if (*eval) return reportOutcome("eval", runEvalStage(eval_options));
    } catch (const Error& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "unexpected error: %s\n", err.what());
        return 1;
    }
    return 0;
}
