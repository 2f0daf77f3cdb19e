#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "scepipe/semantic.hpp"
#include "scepipe/sync.hpp"

namespace scepipe {

/// A user prompt is an ordered interleaving of frame references and text.
struct FrameRef {
    int k = 1; // 1..18
};

struct TextSegment {
    std::string content;
};

using PromptSegment = std::variant<FrameRef, TextSegment>;

/// Prompt text sources. Defaults are compiled in; loadPromptTemplates
/// overrides from plain-text files. version is the first 8 hex chars of the
/// content hash over all active templates and is stamped into every emitted
/// dataset row.
struct PromptTemplates {
    std::string system_caption_and_qa;
    std::string telemetry_line;   // placeholders {t_rel} {ax} {ay} {az} {dalpha} {v}
    std::string task_caption;
    std::string task_qa;          // placeholder {question}
    std::string task_sce;
    std::string version;

    static PromptTemplates defaults();
};

/// Reads any of system_caption_and_qa.txt, telemetry_line.txt,
/// task_caption.txt, task_qa.txt, task_sce.txt from dir; files not present
/// keep their compiled-in default. Recomputes version.
PromptTemplates loadPromptTemplates(const std::string& dir);

enum class TaskProfile { CaptionAndQa };

/// Fixed instruction text including the literal response grammar.
/// Throws Errc::UnknownProfile.
std::string renderSystemPrompt(const PromptTemplates& templates, TaskProfile profile);

/// `t=+{t_rel:.2f}s a=[{ax:.2f},{ay:.2f},{az:.2f}]m/s2 dA={dalpha:.2f}deg
/// v={v:.2f}m/s` with t_rel = t_k - t_e (signed, sign always rendered).
std::string formatTelemetryLine(const PromptTemplates& templates, const SyncedFrame& frame,
                                double t_event);

/// Teacher-facing prompt: header text with the global expert flags, then per
/// frame a FrameRef followed by the telemetry line (when include_imu) and
/// the per-frame semantic line. include_imu=false omits telemetry entirely.
/// Throws Errc::FrameCountMismatch unless exactly 18 frames are given.
std::vector<PromptSegment> renderUserPrompt(const PromptTemplates& templates,
                                            std::span<const SyncedFrame> frames,
                                            const MetadataSummary& summary, bool include_imu,
                                            double t_event);

/// Student-facing prompt: frames plus telemetry only. Semantic metadata is
/// deliberately absent; it conditions the targets, never the student input.
std::vector<PromptSegment> renderStudentPrompt(const PromptTemplates& templates,
                                               std::span<const SyncedFrame> frames,
                                               bool include_imu, double t_event);

struct PromptBundle {
    std::string clip_id;
    std::string system_prompt;
    std::vector<PromptSegment> user_segments;
    bool include_imu = true;
    std::string template_version;
};

/// Canonical text form: FrameRef(k) renders as "<frame:k>", segments joined
/// by newlines. Used for dataset prompt_text and as the mock teacher's
/// deterministic input bytes.
std::string flattenSegments(std::span<const PromptSegment> segments);

} // namespace scepipe
