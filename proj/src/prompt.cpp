#include "scepipe/prompt.hpp"

#include "scepipe/error.hpp"
#include "scepipe/hash.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace scepipe {

namespace {

constexpr const char* kDefaultSystemPrompt =
    "You are an expert driving-safety analyst. You are shown a dashcam sequence of 18 frames\n"
    "sampled at 3 fps over a 6 second window, optionally interleaved with synchronized vehicle\n"
    "telemetry (per-frame mean acceleration in m/s2, integrated heading change in degrees, and\n"
    "speed in m/s, all timed relative to the event moment) and with per-frame object summaries\n"
    "from specialist vision models.\n"
    "\n"
    "Write one detailed caption describing the scene. Focus on the safety-critical event if one\n"
    "occurs: what happens, when it happens relative to the event moment, and which road users\n"
    "are involved. Ground the description in the telemetry where it is provided.\n"
    "\n"
    "Then write open-ended and closed-ended question-answer pairs about the sequence.\n"
    "Closed-ended answers must be short: five words or fewer.\n"
    "\n"
    "Finally classify the sequence severity: normal, near-collision, or collision.\n"
    "\n"
    "Respond with exactly one block in this format:\n"
    "===ANNOTATION===\n"
    "CAPTION: <one line, no newlines>\n"
    "Q[open]: <text>\n"
    "A: <text>\n"
    "Q[closed]: <text>\n"
    "A: <text>\n"
    "SCE: <normal|near-collision|collision>\n"
    "===END===\n"
    "Repeat the Q/A line pairs for each question. The SCE line must contain exactly one of the\n"
    "three labels and nothing else.\n";

constexpr const char* kDefaultTelemetryLine =
    "t={t_rel}s a=[{ax},{ay},{az}]m/s2 dA={dalpha}deg v={v}m/s";

constexpr const char* kDefaultTaskCaption =
    "Describe the scene, focusing on any safety-critical event.";

constexpr const char* kDefaultTaskQa = "Q: {question}";

constexpr const char* kDefaultTaskSce =
    "Classify the severity of this sequence. Answer with exactly one of: normal, near-collision, "
    "collision.";

std::string computeVersion(const PromptTemplates& templates) {
    std::uint64_t h = kFnvOffset;
    for (const std::string* part :
         {&templates.system_caption_and_qa, &templates.telemetry_line, &templates.task_caption,
          &templates.task_qa, &templates.task_sce}) {
        h = fnv1a64(*part, h);
        h = fnv1a64(std::string_view("\x1f", 1), h);
    }
    return hexPrefix8(mix64(h));
}

std::string substitute(std::string text, std::string_view name, const std::string& value) {
    const std::string needle = "{" + std::string(name) + "}";
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
    return text;
}

std::string fixed2(double value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

std::string signed2(double value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%+.2f", value);
    return buf;
}

} // namespace

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates templates;
    templates.system_caption_and_qa = kDefaultSystemPrompt;
    templates.telemetry_line = kDefaultTelemetryLine;
    templates.task_caption = kDefaultTaskCaption;
    templates.task_qa = kDefaultTaskQa;
    templates.task_sce = kDefaultTaskSce;
    templates.version = computeVersion(templates);
    return templates;
}

namespace {

std::string readWholeFile(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace

PromptTemplates loadPromptTemplates(const std::string& dir) {
    PromptTemplates templates = PromptTemplates::defaults();
    const std::filesystem::path base(dir);
    struct Slot {
        const char* file;
        std::string* target;
    };
    for (const Slot& slot : {Slot{"system_caption_and_qa.txt", &templates.system_caption_and_qa},
                             Slot{"telemetry_line.txt", &templates.telemetry_line},
                             Slot{"task_caption.txt", &templates.task_caption},
                             Slot{"task_qa.txt", &templates.task_qa},
                             Slot{"task_sce.txt", &templates.task_sce}}) {
        std::filesystem::path path = base / slot.file;
        if (std::filesystem::exists(path)) *slot.target = readWholeFile(path);
    }
    templates.version = computeVersion(templates);
    return templates;
}

std::string renderSystemPrompt(const PromptTemplates& templates, TaskProfile profile) {
    switch (profile) {
        case TaskProfile::CaptionAndQa: return templates.system_caption_and_qa;
    }
    throw Error(Errc::UnknownProfile, "unknown task profile");
}

std::string formatTelemetryLine(const PromptTemplates& templates, const SyncedFrame& frame,
                                double t_event) {
    std::string line = templates.telemetry_line;
    line = substitute(std::move(line), "t_rel", signed2(frame.t - t_event));
    line = substitute(std::move(line), "ax", fixed2(frame.accel(0)));
    line = substitute(std::move(line), "ay", fixed2(frame.accel(1)));
    line = substitute(std::move(line), "az", fixed2(frame.accel(2)));
    line = substitute(std::move(line), "dalpha", fixed2(frame.delta_angle_deg));
    line = substitute(std::move(line), "v", fixed2(frame.speed_mps));
    return line;
}

std::vector<PromptSegment> renderUserPrompt(const PromptTemplates& templates,
                                            std::span<const SyncedFrame> frames,
                                            const MetadataSummary& summary, bool include_imu,
                                            double t_event) {
    if (frames.size() != kFrameCount)
        throw Error(Errc::FrameCountMismatch,
                    "expected 18 frames, got " + std::to_string(frames.size()));
    std::vector<PromptSegment> segments;
    segments.reserve(1 + frames.size() * 3);
    segments.push_back(TextSegment{summary.header});
    for (const SyncedFrame& frame : frames) {
        segments.push_back(FrameRef{frame.k});
        if (include_imu)
            segments.push_back(TextSegment{formatTelemetryLine(templates, frame, t_event)});
        segments.push_back(
            TextSegment{summary.frame_lines[static_cast<std::size_t>(frame.k - 1)]});
    }
    return segments;
}

std::vector<PromptSegment> renderStudentPrompt(const PromptTemplates& templates,
                                               std::span<const SyncedFrame> frames,
                                               bool include_imu, double t_event) {
    if (frames.size() != kFrameCount)
        throw Error(Errc::FrameCountMismatch,
                    "expected 18 frames, got " + std::to_string(frames.size()));
    std::vector<PromptSegment> segments;
    segments.reserve(frames.size() * 2);
    for (const SyncedFrame& frame : frames) {
        segments.push_back(FrameRef{frame.k});
        if (include_imu)
            segments.push_back(TextSegment{formatTelemetryLine(templates, frame, t_event)});
    }
    return segments;
}

std::string flattenSegments(std::span<const PromptSegment> segments) {
    std::string out;
    for (const PromptSegment& segment : segments) {
        if (!out.empty()) out += '\n';
        if (const auto* ref = std::get_if<FrameRef>(&segment)) {
            out += "<frame:" + std::to_string(ref->k) + ">";
        } else {
            out += std::get<TextSegment>(segment).content;
        }
    }
    return out;
}

} // namespace scepipe
