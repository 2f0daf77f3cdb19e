#include <doctest.h>

#include <fstream>

#include "scepipe/prompt.hpp"

#include "test_util.hpp"

using namespace scepipe;
using scepipe::test::ScratchDir;
using scepipe::test::thrownCode;

namespace {

SyncedFrame makeFrame(int k, double t, double ax, double ay, double az, double dalpha, double v) {
    SyncedFrame frame;
    frame.k = k;
    frame.t = t;
    frame.accel = Eigen::Array3d(ax, ay, az);
    frame.delta_angle_deg = dalpha;
    frame.speed_mps = v;
    return frame;
}

std::array<SyncedFrame, kFrameCount> framesAround(double t_start) {
    std::array<SyncedFrame, kFrameCount> frames{};
    for (int k = 1; k <= kFrameCount; ++k)
        frames[static_cast<std::size_t>(k - 1)] =
            makeFrame(k, t_start + (k - 1) / 3.0, 0.1 * k, -0.2, 9.8, 0.05 * k, 12.0);
    return frames;
}

MetadataSummary emptySummary() {
    MetadataSummary summary;
    summary.header = "no expert flags";
    for (int k = 1; k <= kFrameCount; ++k)
        summary.frame_lines[static_cast<std::size_t>(k - 1)] =
            "frame " + std::to_string(k) + ": no detections";
    return summary;
}

int countContaining(const std::vector<PromptSegment>& segments, const std::string& needle) {
    int count = 0;
    for (const PromptSegment& segment : segments)
        if (const auto* text = std::get_if<TextSegment>(&segment))
            if (text->content.find(needle) != std::string::npos) ++count;
    return count;
}

} // namespace

TEST_SUITE_BEGIN("prompt");

TEST_CASE("telemetry line renders the exact fixed-width format") {
    const PromptTemplates templates = PromptTemplates::defaults();

    const SyncedFrame spike = makeFrame(1, 1.2, -11.30, 0.0, 9.81, 0.0, 13.0);
    CHECK(formatTelemetryLine(templates, spike, 5.2) ==
          "t=-4.00s a=[-11.30,0.00,9.81]m/s2 dA=0.00deg v=13.00m/s");

    const SyncedFrame zero = makeFrame(1, 5.2, 0.0, 0.0, 0.0, 0.0, 0.0);
    CHECK(formatTelemetryLine(templates, zero, 5.2) ==
          "t=+0.00s a=[0.00,0.00,0.00]m/s2 dA=0.00deg v=0.00m/s");

    const SyncedFrame turning = makeFrame(1, 5.2, 0.0, 0.0, 0.0, -2.97, 0.0);
    CHECK(formatTelemetryLine(templates, turning, 5.2).find("dA=-2.97deg") != std::string::npos);
}

TEST_CASE("system prompt embeds the literal response grammar") {
    const PromptTemplates templates = PromptTemplates::defaults();
    const std::string prompt = renderSystemPrompt(templates, TaskProfile::CaptionAndQa);
    CHECK(prompt.find("===ANNOTATION===") != std::string::npos);
    CHECK(prompt.find("CAPTION: <one line, no newlines>") != std::string::npos);
    CHECK(prompt.find("SCE: <normal|near-collision|collision>") != std::string::npos);
    CHECK(prompt.find("===END===") != std::string::npos);
    CHECK(renderSystemPrompt(templates, TaskProfile::CaptionAndQa) == prompt); // byte-stable
}

TEST_CASE("template version tracks template content") {
    const PromptTemplates defaults = PromptTemplates::defaults();
    CHECK(defaults.version.size() == 8);

    ScratchDir dir("templates");
    {
        std::ofstream out(dir.file("system_caption_and_qa.txt"));
        out << "modified system prompt\n===ANNOTATION===\n===END===\n";
    }
    const PromptTemplates loaded = loadPromptTemplates(dir.path().string());
    CHECK(loaded.version != defaults.version);
    CHECK(loaded.telemetry_line == defaults.telemetry_line); // partial override keeps defaults
    CHECK(loaded.system_caption_and_qa == "modified system prompt\n===ANNOTATION===\n===END===\n");
}

TEST_CASE("user prompt interleaves 18 frames with telemetry and semantics") {
    const PromptTemplates templates = PromptTemplates::defaults();
    const auto frames = framesAround(1.2);
    const MetadataSummary summary = emptySummary();

    const std::vector<PromptSegment> segments =
        renderUserPrompt(templates, frames, summary, /*include_imu=*/true, 5.2);

    std::vector<int> ordinals;
    for (const PromptSegment& segment : segments)
        if (const auto* ref = std::get_if<FrameRef>(&segment)) ordinals.push_back(ref->k);
    REQUIRE(ordinals.size() == 18);
    for (int k = 1; k <= kFrameCount; ++k) CHECK(ordinals[static_cast<std::size_t>(k - 1)] == k);

    CHECK(countContaining(segments, "a=[") >= 18);
    CHECK(countContaining(segments, "no detections") == 18);
    CHECK(std::get<TextSegment>(segments.front()).content == "no expert flags");
}

TEST_CASE("imu drop-out removes every telemetry marker") {
    const PromptTemplates templates = PromptTemplates::defaults();
    const auto frames = framesAround(1.2);
    const std::vector<PromptSegment> segments =
        renderUserPrompt(templates, frames, emptySummary(), /*include_imu=*/false, 5.2);
    CHECK(countContaining(segments, "a=[") == 0);
    CHECK(flattenSegments(segments).find("a=[") == std::string::npos);
    CHECK(countContaining(segments, "no detections") == 18); // semantics stay
}

TEST_CASE("student prompt carries frames and telemetry only") {
    const PromptTemplates templates = PromptTemplates::defaults();
    const auto frames = framesAround(1.2);
    const std::string with_imu =
        flattenSegments(renderStudentPrompt(templates, frames, true, 5.2));
    CHECK(with_imu.find("a=[") != std::string::npos);
    CHECK(with_imu.find("no detections") == std::string::npos);
    CHECK(with_imu.find("expert flags") == std::string::npos);

    const std::string without_imu =
        flattenSegments(renderStudentPrompt(templates, frames, false, 5.2));
    CHECK(without_imu.find("a=[") == std::string::npos);
    CHECK(without_imu.find("<frame:18>") != std::string::npos);
}

TEST_CASE("rendering rejects a wrong frame count") {
    const PromptTemplates templates = PromptTemplates::defaults();
    const auto frames = framesAround(0.0);
    std::span<const SyncedFrame> short_span(frames.data(), 17);
    CHECK(thrownCode([&] {
        renderUserPrompt(templates, short_span, emptySummary(), true, 0.0);
    }) == Errc::FrameCountMismatch);
    CHECK(thrownCode([&] { renderStudentPrompt(templates, short_span, true, 0.0); }) ==
          Errc::FrameCountMismatch);
}

TEST_CASE("rendering is a pure function of its inputs") {
    const PromptTemplates templates = PromptTemplates::defaults();
    const auto frames = framesAround(4.0);
    const MetadataSummary summary = emptySummary();
    const std::string first =
        flattenSegments(renderUserPrompt(templates, frames, summary, true, 8.0));
    const std::string second =
        flattenSegments(renderUserPrompt(templates, frames, summary, true, 8.0));
    CHECK(first == second);
}

TEST_SUITE_END();
